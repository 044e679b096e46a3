"""Inequality and identity verdicts computed from experiment results.

Each verdict is named by the formula it tests. ``lhs`` and ``rhs`` are the two
sides; the verdict passes when the formula holds up to ``tolerance``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

TOL_LOWER_BOUND = 0.05  # h >= chi_u
TOL_GROWTH_LINEAR = 0.01  # chi_u = ln lambda_W, p = 0
TOL_GROWTH_PERTURBED = 0.03
TOL_SPREAD = 0.02
TOL_REFINED = 0.05  # center_term + chi_u >= h_nu
TOL_MAXIMUM = 0.1  # h = max(chi_u, chi_s) for a 1-D center
TOL_VARIATIONAL = 0.1
TOL_PESIN = 0.1
TOL_VOLUME = 1e-6
TOL_ANTISYMMETRY = 1e-5
TOL_DEFECT = 1e-2
MAX_RHO = 0.5
TOL_CLASS = 1e-3
TOL_EIGEN = 1e-3
TOL_SCALING = 0.2  # relative, on entropy ratios of time-t maps
TOL_ROOT = 1e-10
TOL_JACOBIAN = 1e-6


@dataclass(frozen=True)
class Verdict:
    name: str
    lhs: float | None
    rhs: float | None
    tolerance: float
    status: str  # pass | fail | skipped
    reason: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_dict(self) -> dict:
        return asdict(self)


def _status(ok: bool) -> str:
    return "pass" if ok else "fail"


def at_least(name, lhs, rhs, tol) -> Verdict:
    """lhs >= rhs - tol."""
    return Verdict(name, lhs, rhs, tol, _status(lhs - rhs >= -tol))


def close(name, lhs, rhs, tol) -> Verdict:
    """|lhs - rhs| <= tol."""
    return Verdict(name, lhs, rhs, tol, _status(abs(lhs - rhs) <= tol))


def below(name, lhs, rhs) -> Verdict:
    """lhs < rhs; the tolerance field is unused."""
    return Verdict(name, lhs, rhs, 0.0, _status(lhs < rhs))


def ratio(name, num, den, target, tol) -> Verdict:
    """|num / den - target| <= tol."""
    if not den:
        return skipped(name, "zero denominator")
    return Verdict(name, num / den, target, tol, _status(abs(num / den - target) <= tol))


def within(name, value, lo, hi) -> Verdict:
    """lo <= value <= hi; rhs holds the interval midpoint, tolerance its half-width."""
    return Verdict(name, value, (lo + hi) / 2, (hi - lo) / 2, _status(lo <= value <= hi))


def skipped(name, reason) -> Verdict:
    return Verdict(name, None, None, 0.0, "skipped", reason)


def _get(results: dict, kind: str, key: str):
    r = results.get(kind)
    if r is None:
        return None
    return r.get(key)


def _need(name: str, **vals) -> Verdict | None:
    missing = [k for k, v in vals.items() if v is None]
    if missing:
        return skipped(name, f"missing inputs: {', '.join(missing)}")
    return None


def verify_toral(spec: dict, results: dict) -> list:
    """Verdicts for a toral map from whichever results are present."""
    out = []
    perturbed = bool(spec.get("amplitude", 0.0)) and bool(spec.get("terms"))
    center_dim = spec.get("center_dim", 0)

    h = _get(results, "entropy", "h_hat")
    chi_u = _get(results, "volume_growth", "chi_u")
    chi_s = _get(results, "volume_growth", "chi_s")
    ln_lam = _get(results, "homology", "ln_lambda_W")
    ln_lam_inv = _get(results, "homology", "ln_lambda_W_inverse")
    h_nu = _get(results, "measure_entropy", "h_nu")
    center_term = _get(results, "lyapunov", "center_term")
    exps = _get(results, "lyapunov", "exponents")

    name = "h(f) >= chi_u(f)"
    out.append(_need(name, h=h, chi_u=chi_u) or at_least(name, h, chi_u, TOL_LOWER_BOUND))

    tol = TOL_GROWTH_PERTURBED if perturbed else TOL_GROWTH_LINEAR
    name = "chi_u(f) = ln lambda_W(f)"
    out.append(_need(name, chi_u=chi_u, ln_lambda=ln_lam) or close(name, chi_u, ln_lam, tol))
    spread = _get(results, "volume_growth", "spread")
    runs = _get(results, "volume_growth", "runs")
    name = "spread of chi_u over seeds and radii"
    if runs is not None and len(runs) < 2:
        out.append(skipped(name, "a single growth run"))
    else:
        out.append(_need(name, spread=spread) or below(name, spread, TOL_SPREAD))
    name = "chi_u(f^-1) = ln lambda_W(f^-1)"
    if "stable_degree" not in results.get("homology", {"stable_degree": 0}):
        out.append(skipped(name, "no stable bundle"))
    else:
        out.append(_need(name, chi_s=chi_s, ln_lambda_inverse=ln_lam_inv)
                   or close(name, chi_s, ln_lam_inv, tol))

    name = "center_term + chi_u(f) >= h_nu(f)"
    if center_term is None and center_dim == 0 and exps is not None:
        center_term = 0.0
    out.append(_need(name, center_term=center_term, chi_u=chi_u, h_nu=h_nu)
               or at_least(name, center_term + chi_u, h_nu, TOL_REFINED))

    name = "h(f) = max(chi_u(f), chi_s(f))"
    if center_dim == 1:
        v = _need(name, h=h, chi_u=chi_u, chi_s=chi_s)
        out.append(v or close(name, h, max(chi_u, chi_s), TOL_MAXIMUM))
    else:
        out.append(skipped(name, f"center dimension {center_dim} is not 1"))

    name = "h_nu(f) <= h(f)"
    out.append(_need(name, h_nu=h_nu, h=h) or at_least(name, h, h_nu, TOL_VARIATIONAL))

    name = "h_nu(f) <= sum of positive exponents"
    pos = None if exps is None else sum(max(v, 0.0) for v in exps)
    out.append(_need(name, h_nu=h_nu, exponents=pos) or at_least(name, pos, h_nu, TOL_PESIN))

    name = "sum of exponents = 0"
    total = _get(results, "lyapunov", "total")
    out.append(_need(name, exponents=total) or close(name, total, 0.0, TOL_VOLUME))

    name = "spectrum(f^-1) = -reverse(spectrum(f))"
    resid = _get(results, "lyapunov", "antisymmetry_residual")
    if resid is None:
        out.append(skipped(name, "missing inputs: inverse spectrum"))
    else:
        # for a perturbed map both spectra are finite-orbit averages; their own
        # convergence gaps bound how far apart they can be expected to lie
        tol = TOL_ANTISYMMETRY
        if perturbed:
            tol += 2.0 * (results["lyapunov"]["max_gap"] + results["lyapunov"]["inverse_max_gap"])
        out.append(close(name, resid, 0.0, tol))

    name = "min J_k / J_(k-1) > 1"
    jr = _get(results, "jacobian", "min_ratio")
    out.append(_need(name, min_ratio=jr) or Verdict(name, jr, 1.0, 0.0, _status(jr > 1.0)))
    name = "min J_k / J_(k-1) = lambda_W / J_(k-1)(A)"
    lam = _get(results, "homology", "lambda_W")
    j_prev = _get(results, "jacobian", "linear_j_prev")
    if perturbed:
        out.append(skipped(name, "identity holds for linear maps only"))
    else:
        v = _need(name, min_ratio=jr, lambda_W=lam, j_prev=j_prev)
        out.append(v or close(name, jr, lam / j_prev, TOL_JACOBIAN))

    cur = results.get("current")
    for name, key, limit in (("|C_n(d alpha)| < 1e-2", "defect", TOL_DEFECT),
                             ("defect decay rate < 0.5", "rho", MAX_RHO),
                             ("limit current class = unstable class", "class_error", TOL_CLASS),
                             ("Lambda^k A h_C = lambda_W h_C", "eigen_residual", TOL_EIGEN)):
        if cur is None:
            out.append(skipped(name, "missing inputs: current"))
        else:
            out.append(below(name, abs(cur[key]), limit))
    if "homology" in results:
        name = "Lambda^k A v = lambda_W v"
        out.append(below(name, results["homology"]["eigen_residual"], TOL_EIGEN))
    return out


def verify_skew(spec: dict, results: dict) -> list:
    out = []
    fe = results.get("fiber_entropy")
    fv = results.get("fiber_volume_growth")
    name = "h(g_t) >= chi_u(g_t) on every fiber"
    if fe is None or fv is None:
        out.append(skipped(name, "missing inputs: fiber entropy or fiber volume growth"))
    else:
        worst = min(zip(fe["fibers"], fv["fibers"]),
                    key=lambda p: p[0]["h_hat"] - p[1]["chi_u"])
        out.append(at_least(name, worst[0]["h_hat"], worst[1]["chi_u"], TOL_LOWER_BOUND))
    name = "h(g_t) / t = h(g_s) / s"
    if fe is None:
        out.append(skipped(name, "missing inputs: fiber entropy"))
    else:
        rates = [fb["per_unit_time"] for fb in fe["fibers"] if fb.get("per_unit_time")]
        if len(set(round(fb["speed"], 9) for fb in fe["fibers"])) < 2:
            out.append(skipped(name, "all fibers have the same speed"))
        else:
            out.append(ratio(name, max(rates), min(rates), 1.0, TOL_SCALING))
    return out


def verify_inequalities(spec: dict, results: dict) -> list:
    """Verdict list for a map specification and its experiment results."""
    if spec["kind"] == "skew":
        return verify_skew(spec, results)
    return verify_toral(spec, results)


def nearest_speed(fibers: list, target: float) -> dict:
    return min(fibers, key=lambda fb: abs(fb["speed"] - target))


def verify_discontinuity(rows: list, h_g1: float, h_g2: float, annihilation_sign: int,
                         fixed_points_at_zero: list) -> list:
    """Verdicts on the entropy jump of the skew family across the saddle-node."""
    out = []
    name = "Fix(alpha_0) = {0, 1/4, 1/2}"
    ys = sorted(p["y"] for p in fixed_points_at_zero)
    if len(ys) != 3:
        out.append(Verdict(name, float(len(ys)), 3.0, 0.0, "fail", f"fixed points {ys}"))
    else:
        err = max(min(abs(y - t), 1 - abs(y - t)) for y, t in zip(ys, (0.0, 0.25, 0.5)))
        out.append(below(name, err, TOL_ROOT))
    name = "fiber speeds at eps = 0 are {1, 2, 1}"
    sp = [p["speed"] for p in sorted(fixed_points_at_zero, key=lambda p: p["y"])]
    if len(sp) != 3:
        out.append(skipped(name, "fixed point count is not 3"))
    else:
        err = max(abs(a - b) for a, b in zip(sp, (1.0, 2.0, 1.0)))
        out.append(below(name, err, TOL_ROOT))
    out.append(ratio("h(g_2) = 2 h(g_1)", h_g2, h_g1, 2.0, TOL_SCALING))
    zero = [r for r in rows if r["epsilon"] == 0.0]
    h0 = zero[0]["h_hat"] if zero else None
    if h0 is not None:
        out.append(ratio("h(f_0) = 2 h(g_1)", h0, h_g1, 2.0, TOL_SCALING))
    for r in rows:
        eps = r["epsilon"]
        if eps == 0.0:
            continue
        if math.copysign(1, eps) == annihilation_sign:
            out.append(ratio(f"h(f_eps) = h(g_1) at eps = {eps:g}", r["h_hat"], h_g1, 1.0,
                             TOL_SCALING))
            if h0 is not None and r["h_hat"] > 0:
                out.append(within(f"h(f_0) / h(f_eps) in [1.7, 2.3] at eps = {eps:g}",
                                  h0 / r["h_hat"], 1.7, 2.3))
        else:
            out.append(ratio(f"h(f_eps) = 2 h(g_1) at eps = {eps:g}", r["h_hat"], h_g1, 2.0,
                             TOL_SCALING))
    return out
