"""Exception types raised across ordlab."""


class OrdlabError(Exception):
    """Base class for all ordlab errors."""


class DegenerateCell(OrdlabError, ValueError):
    pass


class NonFiniteValue(OrdlabError, ArithmeticError):
    pass


class TooFewSamples(OrdlabError, ValueError):
    pass


class DimensionBudgetExceeded(OrdlabError, ValueError):
    pass


class IncommensurateWavevector(OrdlabError, ValueError):
    pass


class DimensionMismatch(OrdlabError, ValueError):
    pass


class NonPositiveDenominator(OrdlabError, ArithmeticError):
    pass


class BandLimitViolated(OrdlabError, ValueError):
    pass


class KindMismatch(OrdlabError, ValueError):
    pass


class InsufficientPoints(OrdlabError, ValueError):
    pass


class NonPositiveValue(OrdlabError, ValueError):
    pass


class InvalidRange(OrdlabError, ValueError):
    pass


class NonHermitianKernel(OrdlabError, ValueError):
    pass


class GridMismatch(OrdlabError, ValueError):
    pass


class ConfigInvalid(OrdlabError, ValueError):
    """Run configuration failed validation.

    ``field`` is the dotted path of the offending key.
    """

    def __init__(self, field, reason):
        self.field = field
        self.reason = reason
        super().__init__(f"{field}: {reason}")
