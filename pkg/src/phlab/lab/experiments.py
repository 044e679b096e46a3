"""Experiment implementations: each takes the built map, its parameters and earlier results.

Every experiment returns ``(result, tables)``: a JSON-ready dict and a mapping
from table name to ``(header, rows)`` for CSV output.
"""

from __future__ import annotations

import math

import numpy as np

from .. import entropy as ent
from .. import foliation as fol
from .. import homology as hom
from .. import lyapunov as lyap
from ..forms import TrigPoly, dx, function_form
from ..torus import (
    CircleMap,
    IntegerMatrix,
    PHConstants,
    SkewProductMap,
    SuspensionFlow,
    ToralDiffeo,
    TrigPerturbation,
    TrigTerm,
)


def build_map(spec: dict):
    A = IntegerMatrix(spec["matrix"])
    if spec["kind"] == "skew":
        return SkewProductMap(SuspensionFlow(A), CircleMap(spec["c"], spec["epsilon"]))
    terms = tuple(
        TrigTerm(tuple(t["coefficient"]), tuple(t["frequency"]), t.get("kind", "sin"))
        for t in spec.get("terms", [])
    )
    return ToralDiffeo(A, TrigPerturbation(terms, float(spec.get("amplitude", 0.0))))


def _dims(spec: dict) -> tuple:
    n = len(spec["matrix"])
    u = spec["unstable_dim"]
    c = spec.get("center_dim", 0)
    return n, u, c, n - u - c


def _base_point(seed: int, index: int, dim: int) -> np.ndarray:
    return np.random.default_rng([seed, index]).random(dim)


def _resolution(params: dict, dim: int, default) -> tuple:
    res = params.get("resolution", default)
    return tuple(res) * dim if len(res) == 1 else tuple(res)


# ---------------------------------------------------------------------------
# toral experiments
# ---------------------------------------------------------------------------


def run_homology(f, spec, params, seed, results):
    n, u, c, s = _dims(spec)
    A = f.linear
    lam, unique = hom.topological_growth(A, u)
    h = hom.exterior_power(A, u)
    cls = hom.unstable_homology_class(A, u)
    out = {
        "degree": u,
        "lambda_W": lam,
        "ln_lambda_W": math.log(lam),
        "unique": unique,
        "unstable_class": cls.coords.tolist(),
        "eigen_residual": hom.check_eigen_relation(h, cls, lam),
        "eigenvalue_moduli": [abs(e) for e in hom.spectrum(A.entries).eigenvalues],
    }
    if s > 0:
        lam_s, _ = hom.topological_growth(A.inverse(), s)
        out.update(stable_degree=s, lambda_W_inverse=lam_s, ln_lambda_W_inverse=math.log(lam_s))
    return out, {}


def run_volume_growth(f, spec, params, seed, results):
    n, u, c, s = _dims(spec)
    radii = params.get("radii", [params.get("r", 0.05)])
    seeds = params.get("seeds", [0])
    n_max = params.get("n_max", 10)
    max_edge = params.get("max_edge", fol.DEFAULT_MAX_EDGE)
    runs, rows = [], []
    for sd in seeds:
        x = _base_point(seed, sd, n)
        for r in radii:
            g = fol.estimate_volume_growth(f, x, r, u, n_max, max_edge=max_edge, seed=sd)
            runs.append({"seed": sd, "r": r, "slope": g.slope, "r2": g.r2,
                         "reliable": g.reliable})
            rows += [(sd, r, k, v) for k, v in g.log_volumes]
    slopes = [run["slope"] for run in runs]
    out = {
        "degree": u,
        "chi_u": float(np.mean(slopes)),
        "spread": float(max(slopes) - min(slopes)),
        "runs": runs,
    }
    tables = {"volume_growth": (("seed", "r", "n", "log_volume"), rows)}
    if params.get("inverse") and s > 0:
        g = fol.estimate_volume_growth(f.inverse(), _base_point(seed, seeds[0], n), radii[0],
                                       s, n_max, max_edge=max_edge, seed=seeds[0])
        out.update(chi_s=g.slope, chi_s_r2=g.r2)
    return out, tables


def _entropy_fragment(e: ent.EntropyEstimate) -> tuple:
    fits = [{"eps": ft.eps, "rate": None if math.isnan(ft.rate) else ft.rate,
             "r2": None if math.isnan(ft.r2) else ft.r2, "n_range": list(ft.n_range),
             "saturated_at": ft.saturated_at} for ft in e.fits]
    rows = [(n, eps, s) for (n, eps), s in sorted(e.table.entries.items())]
    frag = {"h_hat": e.h_hat, "eps_used": e.eps_used, "fits": fits,
            "sample_size": e.table.sample_size, "mode": e.table.mode,
            "monotone": e.table.is_monotone()}
    return frag, rows


def run_entropy(f, spec, params, seed, results):
    n = len(spec["matrix"])
    ladder = params.get("eps_ladder", [0.2, 0.1, 0.05])
    n_max = params.get("n_max", 8)
    if params.get("factorize"):
        res = params.get("resolution", [512])[0]
        fe = ent.estimate_topological_entropy_by_factors(f, ladder, n_max, res, seed)
        blocks, rows = [], []
        for j, (b, e) in enumerate(zip(fe.blocks, fe.factors)):
            frag, r = _entropy_fragment(e)
            blocks.append({"block": list(b), **frag})
            rows += [(j,) + row for row in r]
        return ({"h_hat": fe.h_hat, "factors": blocks},
                {"separated_sets": (("block", "n", "eps", "count"), rows)})
    sample = ent.SampleSpec(_resolution(params, n, [256]), seed)
    e = ent.estimate_topological_entropy(f, ladder, n_max, sample)
    frag, rows = _entropy_fragment(e)
    return frag, {"separated_sets": (("n", "eps", "count"), rows)}


def _measure_fragment(e: ent.MeasureEntropyEstimate) -> dict:
    return {"h": e.h, "conditional": list(e.conditional), "plateau_m": e.plateau_m,
            "rare_context_fraction": e.rare_context_fraction, "biased_low": e.biased_low}


def run_measure_entropy(f, spec, params, seed, results):
    n = len(spec["matrix"])
    res = _resolution(params, n, [2])
    kw = dict(orbit_length=params.get("orbit_length", 4_000_000), seed=seed,
              m_max=params.get("m_max", 12), tol=params.get("tol", 0.01))
    if params.get("factorize"):
        fe = ent.measure_entropy_by_factors(f, res, **kw)
        factors = [{"block": list(b), **_measure_fragment(e)}
                   for b, e in zip(fe.blocks, fe.factors)]
        rows = [(j, m, v) for j, e in enumerate(fe.factors) for m, v in enumerate(e.conditional)]
        return ({"h_nu": fe.h, "factors": factors},
                {"conditional_entropy": (("block", "m", "value"), rows)})
    e = ent.estimate_measure_entropy(f, ent.GridPartition(res), chains=params.get("chains", 4096),
                                     **kw)
    rows = [(m, v) for m, v in enumerate(e.conditional)]
    return ({"h_nu": e.h, **_measure_fragment(e)},
            {"conditional_entropy": (("m", "value"), rows)})


def run_lyapunov(f, spec, params, seed, results):
    n = len(spec["matrix"])
    N = params.get("N", 10_000)
    every = params.get("reorth_every", 1)
    pts = lyap.quasi_random_points(n, params.get("points", 4), seed)
    fwd = [lyap.lyapunov_spectrum(f, x, N, every, seed=seed) for x in pts]
    mean = np.mean([sp.exponents for sp in fwd], axis=0)
    gap = float(max(max(sp.gaps) for sp in fwd))
    out = {"exponents": mean.tolist(), "total": float(np.sum(mean)), "max_gap": gap,
           "per_point": [list(sp.exponents) for sp in fwd], "seed_points": pts.tolist()}
    consts = spec.get("ph_constants")
    if consts:
        bands = lyap.ExponentBands.from_constants(PHConstants(*consts))
        spec_mean = lyap.LyapunovSpectrum(tuple(mean), tuple(pts[0]), N, (gap,) * n)
        grp = lyap.classify_exponents(spec_mean, bands)
        out.update(bands=[bands.lower, bands.upper], stable=list(grp.stable),
                   center=list(grp.center), unstable=list(grp.unstable),
                   ambiguous=list(grp.ambiguous), center_term=grp.center_term)
    if params.get("inverse"):
        inv = [lyap.lyapunov_spectrum(f.inverse(), x, N, every, seed=seed) for x in pts]
        imean = np.mean([sp.exponents for sp in inv], axis=0)
        out.update(inverse_exponents=imean.tolist(),
                   inverse_max_gap=float(max(max(sp.gaps) for sp in inv)),
                   antisymmetry_residual=float(np.max(np.abs(imean + mean[::-1]))))
    rows = [(i, j, v) for i, sp in enumerate(fwd) for j, v in enumerate(sp.exponents)]
    return out, {"lyapunov": (("point", "index", "exponent"), rows)}


def _probe_form(dim: int, degree: int):
    """A non-closed test form of the given degree: sin(2 pi x_0) / (2 pi) (dx_1 ^ ...)."""
    coef = TrigPoly(((1.0 / (2 * math.pi), (1,) + (0,) * (dim - 1), "sin"),))
    if degree == 0:
        return function_form(coef)
    return dx(*range(1, degree + 1), coefficient=coef)


def run_current(f, spec, params, seed, results):
    n, u, c, s = _dims(spec)
    r = params.get("r", 0.05)
    n_it = params.get("n", 8)
    max_edge = params.get("max_edge", fol.DEFAULT_MAX_EDGE)
    x = _base_point(seed, 0, n)
    alpha = _probe_form(n, u - 1)
    dec = fol.defect_decay(f, x, r, alpha, ns=range(2, n_it + 1), max_edge=max_edge, seed=seed)
    patch = fol.seed_unstable_disk(f, x, r, u, max_edge=max_edge, seed=seed)
    for _ in range(n_it):
        patch = fol.iterate_refine(f, patch, max_edge)
    cls = fol.current_class(patch)
    cls = cls / np.linalg.norm(cls)
    ref = hom.unstable_homology_class(f.linear, u)
    lam, _ = hom.topological_growth(f.linear, u)
    # currents are defined up to orientation; compare as lines
    sign = 1.0 if float(np.dot(cls, ref.coords)) >= 0 else -1.0
    limit = hom.HomologyClass(sign * cls, u)
    out = {
        "n": n_it,
        "defect": dec.defects[-1],
        "defects": list(dec.defects),
        "rho": dec.rho,
        "limit_class": limit.coords.tolist(),
        "class_error": float(np.max(np.abs(limit.coords - ref.coords))),
        "eigen_residual": hom.check_eigen_relation(hom.exterior_power(f.linear, u), limit, lam),
    }
    rows = list(zip(dec.ns, dec.defects))
    return out, {"closedness_defect": (("n", "defect"), rows)}


def run_jacobian(f, spec, params, seed, results):
    u = spec["unstable_dim"]
    g = fol.jacobian_gap(f, u, params.get("samples", 10_000), seed)
    # for the linear part, J_(k-1) is the product of the top k-1 singular values of A
    sv = np.linalg.svd(np.asarray(spec["matrix"], dtype=float), compute_uv=False)
    return {"k": u, "min_ratio": g.min_ratio, "argmin": g.argmin.tolist(),
            "samples": g.samples, "holds": g.holds,
            "linear_j_prev": float(np.prod(sv[:u - 1]))}, {}


# ---------------------------------------------------------------------------
# skew-product experiments
# ---------------------------------------------------------------------------


def fiber_table(f: SkewProductMap) -> list:
    return [{"y": p.y, "multiplier": p.multiplier, "speed": float(f.fiber_speed(p.y))}
            for p in f.circle.fixed_points()]


def _speed_key(t: float) -> float:
    # fixed points found numerically carry ~1e-16 noise; fibers with equal speed share work
    return round(float(t), 9)


def fiber_entropy(flow: SuspensionFlow, t: float, ladder, resolution, flow_time: float,
                  seed: int) -> dict:
    """Entropy of the time-t map, fitted over a window of flow time rather than iterates."""
    if t < 1e-9:
        return {"t": t, "h_hat": 0.0, "per_unit_time": None, "note": "identity map"}
    fs = ent.flow_fit_start(t)
    n_max = min(40, max(fs + 2, int(flow_time / t)))
    e = ent.estimate_topological_entropy(flow.time_map(t), ladder, n_max,
                                         ent.SampleSpec(tuple(resolution), seed), fs)
    frag, _ = _entropy_fragment(e)
    return {"t": t, "per_unit_time": e.h_hat / t, "n_max": n_max, "fit_start": fs, **frag}


def run_fibers(f, spec, params, seed, results):
    fib = fiber_table(f)
    rows = [(p["y"], p["multiplier"], p["speed"]) for p in fib]
    return ({"fixed_points": fib, "count": len(fib)},
            {"fibers": (("y", "multiplier", "speed"), rows)})


def run_fiber_entropy(f, spec, params, seed, results, cache=None):
    cache = {} if cache is None else cache
    ladder = params.get("eps_ladder", [0.1])
    res = params.get("resolution", [320, 320, 20])
    res = tuple(res) * 3 if len(res) == 1 else tuple(res)
    flow_time = params.get("flow_time", 5.5)
    per_fiber = []
    for p in fiber_table(f):
        key = (_speed_key(p["speed"]), tuple(ladder), res, flow_time, seed)
        if key not in cache:
            cache[key] = fiber_entropy(f.flow, key[0], ladder, res, flow_time, seed)
        per_fiber.append({"y": p["y"], "speed": p["speed"], **cache[key]})
    h = max(fb["h_hat"] for fb in per_fiber)
    rows = [(fb["y"], fb["speed"], fb["h_hat"]) for fb in per_fiber]
    return ({"h_hat": h, "fibers": per_fiber},
            {"fiber_entropy": (("y", "speed", "h_hat"), rows)})


def run_fiber_volume_growth(f, spec, params, seed, results):
    r = params.get("r", 0.05)
    n_max = params.get("n_max", 60)
    x = _base_point(seed, 0, 3)
    per_fiber = []
    for p in fiber_table(f):
        t = _speed_key(p["speed"])
        if t < 1e-9:
            per_fiber.append({"y": p["y"], "speed": p["speed"], "chi_u": 0.0, "r2": 1.0})
            continue
        g = fol.estimate_flow_volume_growth(f.flow, t, x[:2], x[2], r, n_max, seed=seed)
        per_fiber.append({"y": p["y"], "speed": p["speed"], "chi_u": g.slope, "r2": g.r2})
    rows = [(fb["y"], fb["speed"], fb["chi_u"]) for fb in per_fiber]
    return ({"fibers": per_fiber},
            {"fiber_volume_growth": (("y", "speed", "chi_u"), rows)})


RUNNERS = {
    "homology": run_homology,
    "volume_growth": run_volume_growth,
    "entropy": run_entropy,
    "measure_entropy": run_measure_entropy,
    "lyapunov": run_lyapunov,
    "current": run_current,
    "jacobian": run_jacobian,
    "fibers": run_fibers,
    "fiber_entropy": run_fiber_entropy,
    "fiber_volume_growth": run_fiber_volume_growth,
}

# experiments in one stage only read results of earlier stages
STAGES = (
    ("homology", "fibers"),
    ("volume_growth", "current", "jacobian", "fiber_volume_growth"),
    ("entropy", "measure_entropy", "lyapunov", "fiber_entropy"),
)
