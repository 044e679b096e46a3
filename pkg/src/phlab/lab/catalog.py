"""Built-in scenarios."""

from __future__ import annotations

import copy

from .schema import SCHEMA_VERSION, Scenario, validate

CAT = [[2, 1], [1, 1]]
PH3 = [[2, 1, 0], [1, 1, 0], [0, 0, 1]]
T4 = [[2, 1, 0, 0], [1, 1, 0, 0], [0, 0, 2, 1], [0, 0, 1, 1]]

# volume-preserving perturbation coupling the center coordinate to the hyperbolic block
PH3_TERMS = [
    {"coefficient": [0.5, 0.5, 0.5], "frequency": [1, 0, 0], "kind": "sin"},
    {"coefficient": [0.5, 0.5, 0.0], "frequency": [0, 0, 1], "kind": "sin"},
]
# (lambda_s, lambda_c_lo, lambda_c_hi, lambda_u); exponent bands are their logs +- 0.1
PH_CONSTANTS = [0.5, 0.9, 1.1, 2.0]

SKEW_C = 0.05
SKEW_EPSILONS = (0.0, 0.005, -0.005)

_VERIFY = {"kind": "verify"}


def _toral_suite(entropy: dict, measure: dict, growth: dict,
                 lyapunov_points: int = 4, current: bool = False) -> list:
    out = [
        {"kind": "homology"},
        {"kind": "volume_growth", "inverse": True, **growth},
        {"kind": "entropy", **entropy},
        {"kind": "measure_entropy", **measure},
        {"kind": "lyapunov", "N": 10_000, "points": lyapunov_points, "inverse": True},
        {"kind": "jacobian", "samples": 10_000},
    ]
    if current:
        out.append({"kind": "current", "r": 0.05, "n": 8})
    out.append(_VERIFY)
    return out


_GROWTH_SPREAD = {"seeds": [0, 1, 2, 3, 4], "radii": [0.02, 0.05], "n_max": 10}
_PH3_ENTROPY = {"eps_ladder": [0.2, 0.15, 0.1], "n_max": 6, "resolution": [256, 256, 32]}
_PH3_MEASURE = {"resolution": [2, 2, 1], "orbit_length": 4_000_000}


def _cat2() -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "name": "cat2",
        "seed": 0,
        "map": {"kind": "toral", "matrix": CAT, "unstable_dim": 1, "center_dim": 0,
                "ph_constants": PH_CONSTANTS},
        "experiments": _toral_suite(
            {"eps_ladder": [0.2, 0.1, 0.05], "n_max": 8, "resolution": [512, 512]},
            {"resolution": [2, 2], "orbit_length": 4_000_000},
            _GROWTH_SPREAD, current=True,
        ),
    }


def _ph3(s: float) -> dict:
    name = "ph3" if s == 0 else f"ph3-perturbed-{s:g}"
    m = {"kind": "toral", "matrix": PH3, "unstable_dim": 1, "center_dim": 1,
         "ph_constants": PH_CONSTANTS}
    if s:
        m.update(amplitude=s, terms=PH3_TERMS)
    # the inverse of a perturbed map is evaluated by fixed-point iteration; fewer orbits
    points = 4 if s == 0 else 2
    return {
        "schema_version": SCHEMA_VERSION,
        "name": name,
        "seed": 0,
        "map": m,
        "experiments": _toral_suite(_PH3_ENTROPY, _PH3_MEASURE, _GROWTH_SPREAD, points),
    }


def _t4() -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "name": "t4-product",
        "seed": 0,
        "map": {"kind": "toral", "matrix": T4, "unstable_dim": 2, "center_dim": 0,
                "ph_constants": PH_CONSTANTS},
        "experiments": _toral_suite(
            {"eps_ladder": [0.2, 0.1, 0.05], "n_max": 8, "resolution": [512],
             "factorize": True},
            {"resolution": [2], "orbit_length": 4_000_000, "factorize": True},
            {"seeds": [0], "radii": [0.03], "n_max": 6, "max_edge": 0.08},
            lyapunov_points=2,
        ),
    }


def skew_scenario(eps: float, c: float = SKEW_C) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "name": f"skew-suspension-{eps:g}",
        "seed": 0,
        "map": {"kind": "skew", "matrix": CAT, "c": c, "epsilon": eps},
        "experiments": [
            {"kind": "fibers"},
            {"kind": "fiber_entropy", "eps_ladder": [0.1], "resolution": [640, 640, 20],
             "flow_time": 5.5},
            {"kind": "fiber_volume_growth", "r": 0.05, "n_max": 60},
            _VERIFY,
        ],
    }


def _documents() -> list:
    docs = [_cat2(), _ph3(0.0), _ph3(0.01), _ph3(0.02), _t4()]
    docs += [skew_scenario(e) for e in SKEW_EPSILONS]
    return docs


def builtin_catalog() -> list:
    """All built-in scenarios, validated."""
    return [validate(copy.deepcopy(d)) for d in _documents()]


def builtin(name: str) -> Scenario:
    for sc in builtin_catalog():
        if sc.name == name:
            return sc
    names = ", ".join(sc.name for sc in builtin_catalog())
    raise KeyError(f"no built-in scenario {name!r}; available: {names}")
