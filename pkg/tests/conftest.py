import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ordlab.geometry import LatticeSpec, build_box
from ordlab.montecarlo import ChainParams, SampleSet, initial_configuration, metropolis_chain
from ordlab.potentials import GaussianCore, NullPotential

settings.register_profile("ordlab", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ordlab")

DATA = Path(__file__).parent / "data"

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def report_line():
    def emit(number: int, ok: bool, detail: str):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        return ok
    return emit


@pytest.fixture(scope="session")
def crystal_baseline() -> dict:
    return json.loads((DATA / "crystal_baseline.json").read_text())


@pytest.fixture(scope="session")
def ordered_crystal(crystal_baseline):
    """Low-temperature GaussianCore crystal, same setup as the stored
    baseline but an independent seed and a shorter chain."""
    s = crystal_baseline["setup"]
    box = build_box(LatticeSpec.triangular(s["n1"], s["n2"], s["spacing"]))
    phi = GaussianCore(s["eps0"], s["sigma"])
    params = ChainParams(beta=s["beta"], total_sweeps=4000, equilibration_sweeps=800,
                         initial_step=s["initial_step"], seed=2002, thinning=s["thinning"],
                         fix_center_of_mass=s["fix_center_of_mass"])
    return box, phi, metropolis_chain(initial_configuration(box), phi, params)


@pytest.fixture(scope="session")
def gas_triangular():
    """beta = 0 ideal gas of 64 particles; proposals always accepted."""
    box = build_box(LatticeSpec.triangular(8, 8, 1.6))
    params = ChainParams(beta=0.0, total_sweeps=500, equilibration_sweeps=100, thinning=1, seed=7)
    return box, metropolis_chain(initial_configuration(box), NullPotential(), params)


def frozen_samples(box, copies: int = 64) -> SampleSet:
    frac = initial_configuration(box).frac
    S = copies
    return SampleSet(box, np.repeat(frac[None], S, axis=0), np.zeros(S), np.arange(S),
                     np.zeros(S), {"beta": np.inf})
