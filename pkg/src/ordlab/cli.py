"""Batch front end.

    ordlab <subcommand> [--config PATH] [--seed INT] [--out DIR] [--quiet]

Exit status: 0 success, 1 invalid configuration or run error, 2 a
verification check failed.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import jsonschema
import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .errors import ConfigInvalid, OrdlabError

log = logging.getLogger("ordlab")

EXIT_OK, EXIT_INVALID, EXIT_VERIFY = 0, 1, 2

# --- schemas ------------------------------------------------------------------

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_INT = {"type": "integer"}
_POSINT = {"type": "integer", "minimum": 1}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


POTENTIAL_SCHEMA = {
    "type": "object",
    "properties": {
        "family": {"enum": ["gaussian_core", "substrate_coupled", "harmonic_pair", "null"]},
        "eps0": {"type": "number", "minimum": 0},
        "sigma": _POS,
        "g": _NUM,
        "G": {"type": "array", "items": _NUM, "minItems": 1, "maxItems": 2},
        "G_order": {"type": "array", "items": _INT, "minItems": 1, "maxItems": 2},
        "sigma_g": _POS,
        "kappa": _POS,
    },
    "required": ["family"],
    "additionalProperties": False,
}

SPACE_SCHEMA = _obj({"d": {"enum": [1, 2]}, "M": _POSINT, "L": _POS, "N": _POSINT,
                     "hbar": _POS, "mass": _POS}, ["d", "M", "L", "N"])

SCHEMAS = {
    "simulate": _obj({
        "lattice": _obj({
            "type": {"enum": ["triangular", "square", "chain", "custom"]},
            "n1": _POSINT, "n2": _POSINT, "spacing": _POS,
            "a1": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
            "a2": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
            "dimension": {"enum": [1, 2]},
        }, ["type", "n1"]),
        "potential": POTENTIAL_SCHEMA,
        "beta": {"type": "number", "minimum": 0},
        "sweeps": _POSINT,
        "equilibration": {"type": "integer", "minimum": 0},
        "thinning": _POSINT,
        "seed": _INT,
        "jitter": {"type": "number", "minimum": 0},
        "initial_step": _POS,
        "per_cell": _POSINT,
        "fix_center_of_mass": {"type": "boolean"},
        "max_order": _POSINT,
        "threshold": _POS,
        "check_orders": {"type": "array", "items": {"type": "array", "items": _INT,
                                                     "minItems": 2, "maxItems": 2}},
    }, ["lattice", "potential", "beta", "sweeps", "equilibration"]),
    "verify-quantum": _obj({
        "space": SPACE_SCHEMA,
        "potential": POTENTIAL_SCHEMA,
        "beta": _POS,
        "k": {"type": "array", "items": _INT, "minItems": 1, "maxItems": 2},
        "K": {"type": "array", "items": _INT, "minItems": 1, "maxItems": 2},
        "draws": {"type": "integer", "minimum": 0},
        "seed": _INT,
        "tolerance": _POS,
    }, ["space", "potential", "beta", "k", "K"]),
    "verify-bounds": _obj({
        "space": SPACE_SCHEMA,
        "potential": POTENTIAL_SCHEMA,
        "beta": _POS,
        "k": {"type": "array", "items": _INT, "minItems": 1, "maxItems": 2},
        "draws": {"type": "integer", "minimum": 0},
        "sine_samples": _POSINT,
        "seed": _INT,
    }, ["space", "potential", "beta", "k"]),
    "scaling": _obj({
        "space": SPACE_SCHEMA,
        "potential": POTENTIAL_SCHEMA,
        "beta": _POS,
        "orders": {"type": "array", "items": _POSINT, "minItems": 2},
        "threshold": _POS,
        "seed": _INT,
    }, ["space", "potential", "beta", "orders"]),
    "schrodinger": _obj({
        "grid": _obj({"M": _POSINT, "L": _POS}, ["M", "L"]),
        "mass": _POS,
        "hbar": _POS,
        "kernel": {
            "type": "object",
            "properties": {
                "type": {"enum": ["separable", "local"]},
                "lam": _NUM, "sigma_g": _POS, "potential": POTENTIAL_SCHEMA,
            },
            "required": ["type"],
            "additionalProperties": False,
        },
        "n_states": _POSINT,
        "seed": _INT,
    }, ["grid", "kernel"]),
    "probe-divergence": _obj({
        "d": {"enum": [1, 2, 3]},
        "k0": _POS,
        "eps": _POS,
        "halvings": {"type": "integer", "minimum": 0},
        "seed": _INT,
    }, ["d", "k0", "eps"]),
}

DEFAULTS = {
    "simulate": {
        "lattice": {"type": "triangular", "n1": 8, "n2": 8, "spacing": 1.6},
        "potential": {"family": "gaussian_core", "eps0": 1.0, "sigma": 1.0},
        "beta": 200.0, "sweeps": 1200, "equilibration": 200, "thinning": 5, "seed": 1,
        "fix_center_of_mass": True, "max_order": 1,
    },
    "verify-quantum": {
        "space": {"d": 1, "M": 16, "L": 6.283185307179586, "N": 2},
        "potential": {"family": "gaussian_core", "eps0": 1.0, "sigma": 1.5},
        "beta": 1.0, "k": [1], "K": [2], "draws": 10, "seed": 0,
    },
    "verify-bounds": {
        "space": {"d": 1, "M": 16, "L": 6.283185307179586, "N": 2},
        "potential": {"family": "substrate_coupled", "eps0": 1.0, "sigma": 1.5, "g": 0.5,
                      "G_order": [1]},
        "beta": 1.0, "k": [1], "draws": 5, "seed": 0,
    },
    "scaling": {
        "space": {"d": 1, "M": 32, "L": 20.0, "N": 2},
        "potential": {"family": "gaussian_core", "eps0": 1.0, "sigma": 1.0},
        "beta": 1.0, "orders": [1, 2, 3, 4, 5, 6, 7, 8, 10],
    },
    "schrodinger": {
        "grid": {"M": 256, "L": 30.0},
        "kernel": {"type": "separable", "lam": -1.0, "sigma_g": 1.0},
        "n_states": 10,
    },
    "probe-divergence": {"d": 2, "k0": 0.01, "eps": 1.0, "halvings": 8},
}


def validate_config(sub: str, cfg: dict) -> dict:
    """Schema check; raises ConfigInvalid naming the first offending field."""
    validator = jsonschema.Draft202012Validator(SCHEMAS[sub])
    errors = sorted(validator.iter_errors(cfg), key=lambda e: (list(e.path), e.message))
    if errors:
        err = errors[0]
        path = ".".join(str(p) for p in err.path)
        if err.validator == "required":
            missing = [r for r in err.validator_value if r not in err.instance]
            name = ".".join(filter(None, [path, missing[0] if missing else ""]))
            raise ConfigInvalid(name, "required field is missing")
        if err.validator == "additionalProperties":
            extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
            name = ".".join(filter(None, [path, extra[0] if extra else ""]))
            raise ConfigInvalid(name, "unknown key")
        raise ConfigInvalid(path or "<root>", err.message)
    return cfg


# --- artifacts ----------------------------------------------------------------

def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def metadata(sub: str, cfg: dict, seed) -> dict:
    return {
        "command": sub,
        "config_hash": config_hash(cfg),
        "seed": seed,
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _clean(obj):
    """Make numpy scalars and arrays JSON friendly."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_json(path: Path, meta: dict, body: dict) -> None:
    atomic_write(path, json.dumps(_clean({"meta": meta, **body}), indent=2, sort_keys=True) + "\n")


def write_csv(path: Path, meta: dict, columns, rows) -> None:
    buf = io.StringIO()
    for key in sorted(meta):
        buf.write(f"# {key}: {meta[key]}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    atomic_write(path, buf.getvalue())


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_jsonl(path: Path, meta: dict, records) -> None:
    lines = [json.dumps(_clean({"meta": meta}), sort_keys=True)]
    lines += [json.dumps(_clean(r), sort_keys=True) for r in records]
    atomic_write(path, "\n".join(lines) + "\n")


# --- helpers ------------------------------------------------------------------

def _threads() -> int:
    raw = os.environ.get("ORDLAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigInvalid("ORDLAB_THREADS", f"not an integer: {raw!r}")


def _pmap(fn, items):
    """Order-preserving map over independent tasks, ORDLAB_THREADS wide."""
    n = _threads()
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))


def _potential(block: dict, L: float | None = None, d: int = 1):
    from .potentials import from_config

    block = dict(block)
    if "G_order" in block:
        if L is None:
            raise ConfigInvalid("potential.G_order", "only meaningful with a periodic space")
        orders = block.pop("G_order")
        G = [2.0 * np.pi * m / L for m in orders] + [0.0] * (2 - len(orders))
        block["G"] = G[:max(d, 1)] if d == 1 else G
    try:
        return from_config(block)
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid("potential", str(exc))


def _space(block: dict):
    from .quantum import build_space

    try:
        return build_space(block["d"], block["M"], block["L"], block["N"],
                           block.get("hbar", 1.0), block.get("mass", 1.0))
    except ValueError as exc:
        raise ConfigInvalid("space", str(exc))


def _lattice(block: dict):
    from .geometry import LatticeSpec, build_box

    t = block["type"]
    n1, n2 = block["n1"], block.get("n2", block["n1"])
    a = block.get("spacing", 1.0)
    try:
        if t == "triangular":
            spec = LatticeSpec.triangular(n1, n2, a)
        elif t == "square":
            spec = LatticeSpec((a, 0.0), (0.0, a), n1, n2)
        elif t == "chain":
            spec = LatticeSpec.chain(n1, a)
        else:
            if "a1" not in block or "a2" not in block:
                raise ConfigInvalid("lattice.a1", "custom lattices need a1 and a2")
            spec = LatticeSpec(block["a1"], block["a2"], n1, n2, block.get("dimension", 2))
    except ValueError as exc:
        raise ConfigInvalid("lattice", str(exc))
    return build_box(spec)


def _vec(space, ints):
    ints = list(ints)
    if len(ints) != space.d:
        raise ConfigInvalid("k", f"expected {space.d} integer components, got {len(ints)}")
    return space.wavevector(*ints)


# --- subcommands --------------------------------------------------------------

def cmd_simulate(cfg: dict, seed: int, out: Path, meta: dict) -> int:
    from .geometry import reciprocal_basis, wavevector_grid
    from .montecarlo import ChainParams, initial_configuration, metropolis_chain
    from .observables import CSV_COLUMNS, bogoliubov_check_classical, crystallinity_report, observable_rows

    box = _lattice(cfg["lattice"])
    phi = _potential(cfg["potential"])
    try:
        params = ChainParams(
            beta=cfg["beta"], total_sweeps=cfg["sweeps"], equilibration_sweeps=cfg["equilibration"],
            initial_step=cfg.get("initial_step", 0.1), seed=seed, thinning=cfg.get("thinning", 10),
            fix_center_of_mass=cfg.get("fix_center_of_mass", False),
        )
    except ValueError as exc:
        raise ConfigInvalid("sweeps", str(exc))
    init = initial_configuration(box, cfg.get("per_cell", 1), cfg.get("jitter", 0.0), seed)
    samples = metropolis_chain(init, phi, params)

    write_csv(out / "energies.csv", meta, ["sweep", "U", "acceptance"],
              [{"sweep": int(s), "U": float(u), "acceptance": float(a)}
               for s, u, a in zip(samples.sweeps, samples.energies, samples.acceptance)])
    write_jsonl(out / "samples.jsonl", meta,
                ({"sweep": int(s), "U": float(u), "frac": f} for s, u, f in
                 zip(samples.sweeps, samples.energies, samples.frac)))

    kset = [k for k in wavevector_grid(box, cfg.get("max_order", 1)) if not k.is_zero]
    checks = {}
    K = reciprocal_basis(box.spec)[0]
    wanted = [tuple(o) for o in cfg.get("check_orders", [])]
    for idx, k in enumerate(kset):
        if (k.m1, k.m2) in wanted:
            checks[idx] = bogoliubov_check_classical(samples, phi, k, K)
    write_csv(out / "observables.csv", meta, list(CSV_COLUMNS), observable_rows(samples, kset, checks))
    rep = crystallinity_report(samples, box, kset, cfg.get("threshold", 0.1))
    failed = [i for i, c in checks.items() if not c.holds()]
    write_json(out / "simulate.json", meta, {
        "acceptance_rate": samples.meta["acceptance_rate"],
        "final_step": samples.meta["step"],
        "samples": len(samples),
        "ordered": rep.ordered,
        "max_reciprocal_order": rep.max_reciprocal,
        "bogoliubov_checks": [{"k": list(kset[i].components), "lhs": c.lhs, "rhs": c.rhs,
                               "slack": c.slack, "stderr": c.stderr, "holds": c.holds()}
                              for i, c in sorted(checks.items())],
    })
    return EXIT_VERIFY if failed else EXIT_OK


def _random_quantum_draw(rng: np.random.Generator):
    """One randomised (space, potential, k, K, beta) draw for the inequality sweep."""
    from .potentials import GaussianCore, SubstrateCoupled
    from .quantum import build_space

    d = int(rng.choice([1, 1, 1, 2]))
    if d == 1:
        N = int(rng.integers(1, 4))
        M = {1: 32, 2: 16, 3: 8}[N]
    else:
        N, M = 1, 16
    L = float(rng.uniform(4.0, 12.0))
    space = build_space(d, M, L, N)
    beta = float(10 ** rng.uniform(-1, 1))
    sig = float(rng.uniform(0.2, 0.5) * L)
    eps0 = float(rng.uniform(0.2, 3.0))
    if rng.random() < 0.5:
        phi = GaussianCore(eps0, sig)
    else:
        G = [2 * np.pi * int(rng.integers(1, 3)) / L] + ([0.0] if d == 2 else [])
        phi = SubstrateCoupled(eps0, sig, float(rng.uniform(-3, 3)), tuple(G), float(rng.uniform(0.2, 0.5) * L))
    kmax = max(1, M // 4)
    while True:
        k = rng.integers(-kmax, kmax + 1, size=d)
        if np.any(k):
            break
    K = rng.integers(-kmax, kmax + 1, size=d)
    return space, phi, space.wavevector(*k), space.wavevector(*K), beta


def inequality_sweep(draws: int, seed: int) -> list[dict]:
    from .quantum import bogoliubov_slack

    rng = np.random.default_rng(seed)
    tasks = [_random_quantum_draw(rng) for _ in range(draws)]

    def run(task):
        space, phi, k, K, beta = task
        r = bogoliubov_slack(space, phi, k, K, beta)
        return {"d": space.d, "M": space.M, "N": space.N, "L": space.L, "beta": beta,
                "potential": type(phi).__name__, "params": phi.params(), "k": k, "K": K,
                "lhs": r.lhs, "rhs": r.rhs, "slack": r.slack, "holds": r.holds()}

    return _pmap(run, tasks)


def cmd_verify_quantum(cfg: dict, seed: int, out: Path, meta: dict) -> int:
    from .quantum import bogoliubov_slack, commutator_residuals

    space = _space(cfg["space"])
    phi = _potential(cfg["potential"], space.L, space.d)
    k, K = _vec(space, cfg["k"]), _vec(space, cfg["K"])
    tol = cfg.get("tolerance", 1e-9)
    ident = commutator_residuals(space, phi, k, K, cfg["beta"])
    slack = bogoliubov_slack(space, phi, k, K, cfg["beta"])
    sweep = inequality_sweep(cfg.get("draws", 0), seed)
    ok = ident.passed(tol) and slack.holds() and all(s["holds"] for s in sweep)
    write_json(out / "verify_quantum.json", meta, {
        "residuals": {k: ident.residuals[k] for k in ident.checked},
        "diagnostics": {k: v for k, v in ident.residuals.items() if k not in ident.checked},
        "commutator_closed_form_residual": ident.commutator_closed_form_residual,
        "local_reduction_applicable": ident.local_reduction_applicable,
        "kinetic_double_audit": {
            "fitted_coefficients": ident.kinetic_audit.fitted,
            "fit_residual": ident.kinetic_audit.fit_residual,
            "candidate_residual": ident.kinetic_audit.candidate_residual,
            "candidate_matches": ident.kinetic_audit.candidate_matches,
            "candidate_thermal_gap": ident.kinetic_audit.candidate_thermal_gap,
        },
        "band_halfwidth": ident.band_halfwidth,
        "band_margin": ident.band_margin,
        "bogoliubov": {"lhs": slack.lhs, "rhs": slack.rhs, "slack": slack.slack,
                       "denominator": slack.denominator, "holds": slack.holds()},
        "sweep": sweep,
        "tolerance": tol,
        "passed": ok,
        "params": ident.params,
    })
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_verify_bounds(cfg: dict, seed: int, out: Path, meta: dict) -> int:
    from .bounds import kinetic_bound_check, potential_bound_check, sine_inequality_violations
    from .quantum import hamiltonian, thermal_state

    space = _space(cfg["space"])
    phi = _potential(cfg["potential"], space.L, space.d)
    k = _vec(space, cfg["k"])
    beta = cfg["beta"]
    rng = np.random.default_rng(seed)
    cases = [(beta, k)]
    for _ in range(cfg.get("draws", 0)):
        b = float(10 ** rng.uniform(-1, 1))
        j = rng.integers(1, space.M // 4 + 1, size=space.d)
        cases.append((b, space.wavevector(*j)))

    def run(case):
        b, kk = case
        st = thermal_state(hamiltonian(space, phi), b)
        return [kinetic_bound_check(space, b, kk, phi, state=st).to_dict(),
                potential_bound_check(space, phi, kk, b, state=st).to_dict()]

    reports = [r for pair in _pmap(run, cases) for r in pair]
    n_sine = cfg.get("sine_samples", 100_000)
    bad = sine_inequality_violations(n_sine, seed=seed)
    ok = all(r["slack"] >= -1e-9 * abs(r["right"]) for r in reports) and bad == 0
    write_json(out / "verify_bounds.json", meta, {
        "reports": reports, "sine_samples": n_sine, "sine_violations": bad, "passed": ok,
    })
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_scaling(cfg: dict, seed: int, out: Path, meta: dict) -> int:
    from .bounds import k_scaling_exponent, measure_denominator_curve

    space = _space(cfg["space"])
    phi = _potential(cfg["potential"], space.L, space.d)
    ks, vals = measure_denominator_curve(space, phi, cfg["orders"], cfg["beta"])
    rep = k_scaling_exponent(ks, vals, cfg.get("threshold", 1.5))
    write_csv(out / "denominator.csv", meta, ["k", "denominator"],
              [{"k": float(a), "denominator": float(b)} for a, b in zip(ks, vals)])
    write_json(out / "scaling.json", meta, rep.to_dict())
    return EXIT_OK


def cmd_schrodinger(cfg: dict, seed: int, out: Path, meta: dict) -> int:
    from .schrodinger import (DeltaLocal, RelativeGrid, Separable, build_relative_hamiltonian,
                              local_reduction_check, separable_bound_state_oracle, solve_spectrum)

    g = cfg["grid"]
    try:
        grid = RelativeGrid(g["M"], g["L"])
    except ValueError as exc:
        raise ConfigInvalid("grid", str(exc))
    mass, hbar = cfg.get("mass", 1.0), cfg.get("hbar", 1.0)
    kc = cfg["kernel"]
    body = {}
    if kc["type"] == "separable":
        for key in ("lam", "sigma_g"):
            if key not in kc:
                raise ConfigInvalid(f"kernel.{key}", "required field is missing")
        kernel = Separable(kc["lam"], kc["sigma_g"])
        oracle = separable_bound_state_oracle(kernel, grid, mass, hbar)
        body["oracle_bound_state"] = oracle
    else:
        if "potential" not in kc:
            raise ConfigInvalid("kernel.potential", "required field is missing")
        phi = _potential(kc["potential"])
        if not phi.is_local:
            raise ConfigInvalid("kernel.potential", "the local kernel needs a local potential")
        kernel = DeltaLocal(phi)
        body["local_reduction_deviation"] = local_reduction_check(phi, grid, mass, hbar,
                                                                  cfg.get("n_states", 10))
    H = build_relative_hamiltonian(kernel, grid, mass, hbar)
    spec = solve_spectrum(H, cfg.get("n_states", 10), grid)
    body["energies"] = spec.energies
    body["bound_states"] = int(np.count_nonzero(spec.energies < 0))
    ok = True
    if body.get("oracle_bound_state") is not None:
        body["oracle_error"] = abs(spec.energies[0] - body["oracle_bound_state"])
        ok = body["oracle_error"] < 1e-8
    if "local_reduction_deviation" in body:
        ok = body["local_reduction_deviation"] < 1e-10
    body["passed"] = ok
    write_csv(out / "spectrum.csv", meta, ["index", "energy", "parity"],
              [{"index": i, "energy": float(e), "parity": int(p)}
               for i, (e, p) in enumerate(zip(spec.energies, spec.parity))])
    write_json(out / "schrodinger.json", meta, body)
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_probe_divergence(cfg: dict, seed: int, out: Path, meta: dict) -> int:
    from .bounds import divergence_probe

    try:
        rep = divergence_probe(cfg["d"], cfg["k0"], cfg["eps"], cfg.get("halvings", 8))
    except OrdlabError as exc:
        raise ConfigInvalid("k0", str(exc))
    write_csv(out / "divergence.csv", meta, ["k0", "integral"],
              [{"k0": a, "integral": b} for a, b in rep.table])
    write_json(out / "divergence.json", meta, rep.to_dict())
    return EXIT_OK if rep.rel_error < 1e-6 else EXIT_VERIFY


COMMANDS = {
    "simulate": cmd_simulate,
    "verify-quantum": cmd_verify_quantum,
    "verify-bounds": cmd_verify_bounds,
    "scaling": cmd_scaling,
    "schrodinger": cmd_schrodinger,
    "probe-divergence": cmd_probe_divergence,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ordlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"ordlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run {name}")
        p.add_argument("--config", type=Path, help="JSON configuration (defaults built in)")
        p.add_argument("--seed", type=int, help="override the configuration seed")
        p.add_argument("--out", type=Path, default=Path("ordlab-out"), help="output directory")
        p.add_argument("--quiet", action="store_true", help="only report errors")
    return parser


def load_config(sub: str, path: Path | None) -> dict:
    if path is None:
        return copy.deepcopy(DEFAULTS[sub])
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigInvalid("--config", f"no such file: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigInvalid("--config", f"not valid JSON ({exc})")
    if not isinstance(cfg, dict):
        raise ConfigInvalid("--config", "top level must be an object")
    return cfg


def run_command(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s")
    sub = args.command
    try:
        cfg = validate_config(sub, load_config(sub, args.config))
        if args.seed is not None:
            cfg["seed"] = args.seed
        seed = cfg.get("seed", 0)
        meta = metadata(sub, cfg, seed)
        _threads()
        # BLAS stays single threaded so results do not depend on ORDLAB_THREADS
        with threadpool_limits(limits=1):
            status = COMMANDS[sub](cfg, seed, args.out, meta)
    except ConfigInvalid as exc:
        print(f"ordlab: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OrdlabError as exc:
        print(f"ordlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if status == EXIT_VERIFY:
        log.error("%s: verification failed, see %s", sub, args.out)
    else:
        log.info("%s: done, outputs in %s", sub, args.out)
    return status


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
