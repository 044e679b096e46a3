"""Iterated pieces of unstable leaves, their volume growth, and the currents they define.

A ``PolyPatch`` is a polyline (k = 1) or triangulated disk (k = 2). Vertices are
stored as a torus point plus an integer translate, so the patch is a connected
object in the lift R^n while every map is still evaluated on [0,1)^n. For a map
F(x) = A x + p(x) with p periodic, F(x + m) = F(x) + A m, which keeps the
translates exact integers under iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay
from scipy.stats import qmc

from .forms import DifferentialForm
from .torus import SuspensionFlow, ToralDiffeo

DEFAULT_MAX_EDGE = 0.02
DEFAULT_BUDGET = 2_000_000
N_WARM = 40

_GAUSS3_NODES = np.array([0.5 - math.sqrt(0.15), 0.5, 0.5 + math.sqrt(0.15)])
_GAUSS3_WEIGHTS = np.array([5.0, 8.0, 5.0]) / 18.0


class VertexBudgetError(RuntimeError):
    """Refinement would exceed the configured vertex budget."""


class UnstableDirectionError(RuntimeError):
    """Power iteration for the unstable frame did not settle."""


@dataclass(frozen=True, eq=False)
class PolyPatch:
    degree: int
    points: np.ndarray  # (V, n) in [0, 1)
    translates: np.ndarray  # (V, n) int64; the lift of vertex i is points[i] + translates[i]
    triangles: np.ndarray | None = None  # (T, 3), counter-clockwise w.r.t. the patch orientation
    orientation: int = 1

    def __post_init__(self):
        if self.degree not in (1, 2):
            raise ValueError("only curves (k=1) and surfaces (k=2) are supported")
        if self.degree == 1 and len(self.points) < 2:
            raise ValueError("a polyline needs at least two vertices")
        if self.degree == 2 and (self.triangles is None or len(self.triangles) == 0):
            raise ValueError("a surface patch needs triangles")

    @property
    def n_vertices(self) -> int:
        return len(self.points)

    def lifted(self) -> np.ndarray:
        return self.points + self.translates

    def edges(self) -> np.ndarray:
        """(E, 2) vertex pairs: consecutive pairs for curves, unique edges for meshes."""
        if self.degree == 1:
            i = np.arange(self.n_vertices - 1)
            return np.column_stack([i, i + 1])
        return _mesh_edges(self.triangles)[0]


def _split(lift: np.ndarray):
    t = np.floor(lift)
    return lift - t, t.astype(np.int64)


def _diff(points, translates, i, j):
    """Lifted displacement from vertex i to vertex j, integer part kept exact."""
    return (translates[j] - translates[i]).astype(float) + (points[j] - points[i])


def _map_split(f, points, translates):
    y = f.apply_lift(points)
    p, t = _split(y)
    return p, t + translates @ f.linear.entries.T


def _midpoints(points, translates, i, j):
    d = _diff(points, translates, i, j)
    return _split_shift(points[i] + 0.5 * d, translates[i])


def _split_shift(x, shift):
    p, t = _split(x)
    return p, t + shift


# ---------------------------------------------------------------------------
# unstable frames and seeding
# ---------------------------------------------------------------------------


def _frame_sign(Q: np.ndarray) -> np.ndarray:
    """Orient frames so the leading Pluecker coordinate is positive (per column for k=1)."""
    Q = Q.copy()
    v = Q[..., 0]
    idx = np.argmax(np.abs(v) > 1e-12, axis=-1)
    s = np.sign(np.take_along_axis(v, idx[..., None], -1))[..., 0]
    Q[..., 0] *= s[..., None]
    if Q.shape[-1] == 2:
        n = Q.shape[-2]
        # bivector coordinates in lexicographic order
        pl = np.stack(
            [Q[..., i, 0] * Q[..., j, 1] - Q[..., j, 0] * Q[..., i, 1]
             for i in range(n) for j in range(i + 1, n)],
            axis=-1,
        )
        idx = np.argmax(np.abs(pl) > 1e-12, axis=-1)
        s = np.sign(np.take_along_axis(pl, idx[..., None], -1))[..., 0]
        Q[..., 1] *= s[..., None]
    return Q


def unstable_frames(f, x: np.ndarray, k: int, n_warm: int = N_WARM, seed: int = 0,
                    tol: float = 1e-7) -> np.ndarray:
    """Orthonormal frames spanning the dominant k-dimensional direction at each x.

    A random frame is pushed forward along the orbit segment f^-n_warm(x), ..., x
    with QR re-orthonormalization. A second frame started 10 steps later must
    span the same plane, otherwise ``UnstableDirectionError``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    S, n = x.shape
    orbit = [x]
    for _ in range(n_warm):
        orbit.append(f.invert(orbit[-1]))
    orbit = orbit[::-1]  # f^-n_warm(x), ..., x
    rng = np.random.default_rng(seed)
    Q1 = np.linalg.qr(rng.standard_normal((S, n, k)))[0]
    Q2 = np.linalg.qr(rng.standard_normal((S, n, k)))[0]
    for step, z in enumerate(orbit[:-1]):
        Df = f.differential(z)
        Q1 = np.linalg.qr(Df @ Q1)[0]
        if step >= 10:
            Q2 = np.linalg.qr(Df @ Q2)[0]
    resid = Q2 - Q1 @ (np.swapaxes(Q1, -1, -2) @ Q2)
    gap = float(np.max(np.linalg.norm(resid, axis=(-2, -1))))
    if not gap < tol:
        raise UnstableDirectionError(
            f"unstable frame did not converge (subspace gap {gap:.2e} after {n_warm} steps); "
            "the map may not be partially hyperbolic at this strength"
        )
    return _frame_sign(Q1)


def seed_unstable_disk(f, x, r: float, k: int, max_edge: float = DEFAULT_MAX_EDGE,
                       n_warm: int = N_WARM, seed: int = 0) -> PolyPatch:
    """A straight k-disk of radius r centred at x, tangent to the unstable plane."""
    if k not in (1, 2):
        raise ValueError("k must be 1 or 2")
    if not 0 < r <= 0.25:
        raise ValueError("radius must lie in (0, 0.25]")
    x = np.asarray(x, dtype=float)
    U = unstable_frames(f, x[None, :], k, n_warm=n_warm, seed=seed)[0]
    if k == 1:
        m = max(1, math.ceil(2 * r / max_edge))
        t = np.linspace(-r, r, m + 1)
        p, tr = _split(x + t[:, None] * U[:, 0])
        return PolyPatch(1, p, tr)
    h = max_edge / 1.5
    rings = max(1, math.ceil(r / h))
    uv = [np.zeros((1, 2))]
    for j in range(1, rings + 1):
        m = 6 * j
        ang = 2 * math.pi * np.arange(m) / m
        uv.append(r * j / rings * np.column_stack([np.cos(ang), np.sin(ang)]))
    uv = np.vstack(uv)
    tri = Delaunay(uv).simplices.astype(np.int64)
    a, b, c = uv[tri[:, 0]], uv[tri[:, 1]], uv[tri[:, 2]]
    cross = (b - a)[:, 0] * (c - a)[:, 1] - (b - a)[:, 1] * (c - a)[:, 0]
    tri[cross < 0] = tri[cross < 0][:, [0, 2, 1]]
    p, tr = _split(x + uv @ U.T)
    return refine(PolyPatch(2, p, tr, tri), max_edge)


# ---------------------------------------------------------------------------
# iteration with refinement
# ---------------------------------------------------------------------------


def _mesh_edges(tri: np.ndarray):
    """Unique undirected edges and the (T, 3) edge id of local edges (v0v1, v1v2, v2v0)."""
    local = np.stack([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]], axis=1)  # (T,3,2)
    key = np.sort(local, axis=-1).reshape(-1, 2)
    uniq, inv = np.unique(key, axis=0, return_inverse=True)
    return uniq, inv.reshape(-1, 3)


def _edge_lengths(points, translates, pairs):
    d = _diff(points, translates, pairs[:, 0], pairs[:, 1])
    return np.linalg.norm(d, axis=1)


def _refine_curve(f, src_p, src_t, img_p, img_t, max_edge, budget):
    while True:
        lengths = _edge_lengths(img_p, img_t, np.column_stack([
            np.arange(len(img_p) - 1), np.arange(1, len(img_p))]))
        long = np.flatnonzero(lengths > max_edge)
        if long.size == 0:
            return img_p, img_t
        if len(img_p) + long.size > budget:
            raise VertexBudgetError(
                f"refinement needs {len(img_p) + long.size} vertices; budget is {budget}"
            )
        mp, mt = _midpoints(src_p, src_t, long, long + 1)
        ip, it = (mp, mt) if f is None else _map_split(f, mp, mt)
        at = long + 1
        src_p = np.insert(src_p, at, mp, axis=0)
        src_t = np.insert(src_t, at, mt, axis=0)
        img_p = np.insert(img_p, at, ip, axis=0)
        img_t = np.insert(img_t, at, it, axis=0)


def _refine_mesh(f, src_p, src_t, img_p, img_t, tri, max_edge, budget):
    """Conforming longest-edge bisection until every edge is <= max_edge."""
    tri = tri.copy()
    while True:
        edges, eid = _mesh_edges(tri)
        lengths = _edge_lengths(img_p, img_t, edges)
        marked = lengths > max_edge
        if not marked.any():
            return img_p, img_t, tri
        tl = lengths[eid]  # (T, 3)
        # ties broken by edge id so the choice is deterministic
        longest = _argmax_tiebreak(tl, eid)
        longest_eid = eid[np.arange(len(tri)), longest]
        while True:
            need = marked[eid].any(axis=1) & ~marked[longest_eid]
            if not need.any():
                break
            marked[longest_eid[need]] = True
        n_new = int(marked.sum())
        if len(img_p) + n_new > budget:
            raise VertexBudgetError(
                f"refinement needs {len(img_p) + n_new} vertices; budget is {budget}"
            )
        me = np.flatnonzero(marked)
        mp, mt = _midpoints(src_p, src_t, edges[me, 0], edges[me, 1])
        ip, it = (mp, mt) if f is None else _map_split(f, mp, mt)
        mid_index = np.full(len(edges), -1, dtype=np.int64)
        mid_index[me] = len(img_p) + np.arange(me.size)
        src_p = np.vstack([src_p, mp])
        src_t = np.vstack([src_t, mt])
        img_p = np.vstack([img_p, ip])
        img_t = np.vstack([img_t, it])

        split = marked[eid].any(axis=1)
        keep = tri[~split]
        ts = tri[split]
        es = eid[split]
        ls = longest[split]
        # rotate so the longest edge is (v0, v1)
        rot = np.stack([(ls + j) % 3 for j in range(3)], axis=1)
        v = np.take_along_axis(ts, rot, axis=1)
        e = np.take_along_axis(es, rot, axis=1)  # e[:,0]=v0v1, e[:,1]=v1v2, e[:,2]=v2v0
        m01 = mid_index[e[:, 0]]
        m12 = mid_index[e[:, 1]]
        m20 = mid_index[e[:, 2]]
        v0, v1, v2 = v[:, 0], v[:, 1], v[:, 2]
        out = [keep]
        has12 = m12 >= 0
        has20 = m20 >= 0
        # left half (v0, m01, v2)
        out.append(np.column_stack([v0, m01, v2])[~has20])
        out.append(np.column_stack([v0, m01, m20])[has20])
        out.append(np.column_stack([m01, v2, m20])[has20])
        # right half (m01, v1, v2)
        out.append(np.column_stack([m01, v1, v2])[~has12])
        out.append(np.column_stack([m01, v1, m12])[has12])
        out.append(np.column_stack([m01, m12, v2])[has12])
        tri = np.vstack(out)


def _argmax_tiebreak(tl: np.ndarray, eid: np.ndarray) -> np.ndarray:
    best = np.zeros(len(tl), dtype=np.int64)
    for j in (1, 2):
        better = (tl[:, j] > tl[np.arange(len(tl)), best]) | (
            (tl[:, j] == tl[np.arange(len(tl)), best]) & (eid[:, j] < eid[np.arange(len(tl)), best])
        )
        best = np.where(better, j, best)
    return best


def iterate_refine(f, patch: PolyPatch, max_edge: float = DEFAULT_MAX_EDGE,
                   budget: int = DEFAULT_BUDGET) -> PolyPatch:
    """Image of the patch under f, with long edges bisected at images of source midpoints.

    ``f=None`` refines without mapping.
    """
    if f is None:
        img_p, img_t = patch.points, patch.translates
    else:
        img_p, img_t = _map_split(f, patch.points, patch.translates)
    if patch.degree == 1:
        p, t = _refine_curve(f, patch.points, patch.translates, img_p, img_t, max_edge, budget)
        return PolyPatch(1, p, t, None, patch.orientation)
    p, t, tri = _refine_mesh(f, patch.points, patch.translates, img_p, img_t,
                             patch.triangles, max_edge, budget)
    return PolyPatch(2, p, t, tri, patch.orientation)


def refine(patch: PolyPatch, max_edge: float = DEFAULT_MAX_EDGE,
           budget: int = DEFAULT_BUDGET) -> PolyPatch:
    return iterate_refine(None, patch, max_edge, budget)


def patch_volume(patch: PolyPatch) -> float:
    if patch.degree == 1:
        return float(np.sum(_edge_lengths(patch.points, patch.translates, patch.edges())))
    return float(np.sum(_triangle_areas(patch)))


def _triangle_vectors(patch: PolyPatch):
    t = patch.triangles
    e1 = _diff(patch.points, patch.translates, t[:, 0], t[:, 1])
    e2 = _diff(patch.points, patch.translates, t[:, 0], t[:, 2])
    return e1, e2


def _triangle_areas(patch: PolyPatch) -> np.ndarray:
    e1, e2 = _triangle_vectors(patch)
    g = np.einsum("ij,ij->i", e1, e1) * np.einsum("ij,ij->i", e2, e2) - np.einsum("ij,ij->i", e1, e2) ** 2
    return 0.5 * np.sqrt(np.maximum(g, 0.0))


# ---------------------------------------------------------------------------
# volume growth
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GrowthEstimate:
    log_volumes: tuple  # (n, ln Vol) pairs
    slope: float
    intercept: float
    r2: float
    n_range: tuple

    @property
    def reliable(self) -> bool:
        return self.r2 >= 0.99


def fit_line(n, y):
    n = np.asarray(n, dtype=float)
    y = np.asarray(y, dtype=float)
    A = np.column_stack([n, np.ones_like(n)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    ss_res = float(np.sum((y - (slope * n + intercept)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res < 1e-24 else 0.0)
    return float(slope), float(intercept), r2


def _growth_from_logs(logs) -> GrowthEstimate:
    n_max = logs[-1][0]
    lo = n_max // 2
    sel = [(n, v) for n, v in logs if n >= lo]
    slope, intercept, r2 = fit_line([n for n, _ in sel], [v for _, v in sel])
    return GrowthEstimate(tuple(logs), slope, intercept, r2, (lo, n_max))


def estimate_volume_growth(f, x, r: float, k: int, n_max: int,
                           max_edge: float = DEFAULT_MAX_EDGE,
                           budget: int = DEFAULT_BUDGET, seed: int = 0) -> GrowthEstimate:
    """Slope of ln Vol(f^n W_r(x)) over the upper half of n = 0..n_max."""
    if n_max < 6:
        raise ValueError("n_max must be >= 6")
    patch = seed_unstable_disk(f, x, r, k, max_edge=max_edge, seed=seed)
    logs = [(0, math.log(patch_volume(patch)))]
    for n in range(1, n_max + 1):
        patch = iterate_refine(f, patch, max_edge, budget)
        logs.append((n, math.log(patch_volume(patch))))
    return _growth_from_logs(logs)


def estimate_flow_volume_growth(susp: SuspensionFlow, t: float, x, height: float, r: float,
                                n_max: int = 60, max_edge: float = DEFAULT_MAX_EDGE,
                                cap: float = 20.0, seed: int = 0) -> GrowthEstimate:
    """Volume growth of a horizontal unstable segment under the time-t map g_t.

    All points of a horizontal segment share the height, so each step applies the
    base map as many times as the height crosses the roof. The segment is cut back
    to its central piece whenever it exceeds ``cap`` in length and the discarded
    factor is carried in the log, which lets n_max be large enough to average
    out the integer crossing pattern.
    """
    if n_max < 6:
        raise ValueError("n_max must be >= 6")
    base = ToralDiffeo(susp.base_map)
    inv = base.inverse()
    patch = seed_unstable_disk(base, x, r, 1, max_edge=max_edge, seed=seed)
    offset = 0.0
    h = float(height)
    logs = [(0, math.log(patch_volume(patch)))]
    for n in range(1, n_max + 1):
        h += t
        m = math.floor(h)
        h -= m
        step = base if m >= 0 else inv
        for _ in range(abs(m)):
            patch = iterate_refine(step, patch, max_edge)
        vol = patch_volume(patch)
        if vol > cap:
            keep = max(2, int(len(patch.points) * (2 * r) / vol))
            mid = len(patch.points) // 2
            sl = slice(mid - keep // 2, mid - keep // 2 + keep + 1)
            piece = PolyPatch(1, patch.points[sl], patch.translates[sl])
            offset += math.log(vol) - math.log(patch_volume(piece))
            patch = piece
            vol = patch_volume(patch)
        logs.append((n, offset + math.log(vol)))
    return _growth_from_logs(logs)


# ---------------------------------------------------------------------------
# currents
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CurrentSample:
    n: int
    value: float
    volume: float


def integrate_form(patch: PolyPatch, omega: DifferentialForm) -> float:
    """Integral of omega over the patch (3-point Gauss per chord, edge-midpoint rule per triangle)."""
    if omega.degree != patch.degree:
        raise ValueError(f"form degree {omega.degree} != patch degree {patch.degree}")
    n = patch.points.shape[1]
    if patch.degree == 1:
        e = patch.edges()
        d = _diff(patch.points, patch.translates, e[:, 0], e[:, 1])
        base = patch.points[e[:, 0]]
        total = np.zeros(len(e))
        for s, w in zip(_GAUSS3_NODES, _GAUSS3_WEIGHTS):
            coef = omega.coefficient_arrays(base + s * d, n)
            for (i,), c in coef.items():
                total += w * c * d[:, i]
        return patch.orientation * float(np.sum(total))
    e1, e2 = _triangle_vectors(patch)
    base = patch.points[patch.triangles[:, 0]]
    total = np.zeros(len(e1))
    for q in (0.5 * e1, 0.5 * e2, 0.5 * (e1 + e2)):
        coef = omega.coefficient_arrays(base + q, n)
        for (i, j), c in coef.items():
            total += (1.0 / 6.0) * c * (e1[:, i] * e2[:, j] - e1[:, j] * e2[:, i])
    return patch.orientation * float(np.sum(total))


def evaluate_current(patch: PolyPatch, omega: DifferentialForm, n: int = 0) -> CurrentSample:
    """C_n(omega) = (1 / Vol) * integral of omega over the patch."""
    vol = patch_volume(patch)
    return CurrentSample(n, integrate_form(patch, omega) / vol, vol)


def boundary_edges(patch: PolyPatch) -> np.ndarray:
    """Oriented boundary edges of a mesh, each appearing in exactly one triangle."""
    t = patch.triangles
    directed = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    key = np.sort(directed, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    return directed[counts[inv.ravel()] == 1]


def boundary_term(patch: PolyPatch, alpha: DifferentialForm) -> float:
    """Integral of alpha over the oriented boundary of the patch."""
    if alpha.degree != patch.degree - 1:
        raise ValueError("alpha must have degree k - 1")
    n = patch.points.shape[1]
    if patch.degree == 1:
        ends = patch.points[[0, -1]]
        vals = sum(c for c in alpha.coefficient_arrays(ends, n).values())
        if np.isscalar(vals) or np.ndim(vals) == 0:
            return 0.0
        return patch.orientation * float(vals[1] - vals[0])
    e = boundary_edges(patch)
    d = _diff(patch.points, patch.translates, e[:, 0], e[:, 1])
    base = patch.points[e[:, 0]]
    total = np.zeros(len(e))
    for s, w in zip(_GAUSS3_NODES, _GAUSS3_WEIGHTS):
        for (i,), c in alpha.coefficient_arrays(base + s * d, n).items():
            total += w * c * d[:, i]
    return patch.orientation * float(np.sum(total))


def closedness_defect(f, x, r: float, n: int, alpha: DifferentialForm,
                      max_edge: float = DEFAULT_MAX_EDGE, seed: int = 0) -> float:
    """C_n(d alpha) through Stokes: boundary integral of alpha over f^n W_r(x), over Vol."""
    if n < 0:
        raise ValueError("n must be >= 0")
    patch = seed_unstable_disk(f, x, r, alpha.degree + 1, max_edge=max_edge, seed=seed)
    for _ in range(n):
        patch = iterate_refine(f, patch, max_edge)
    return boundary_term(patch, alpha) / patch_volume(patch)


@dataclass(frozen=True)
class DefectDecay:
    ns: tuple
    defects: tuple
    rho: float


def defect_decay(f, x, r: float, alpha: DifferentialForm, ns=range(2, 11),
                 max_edge: float = DEFAULT_MAX_EDGE, seed: int = 0) -> DefectDecay:
    """Defect sequence and its decay rate.

    The rate is fitted on the monotone envelope max_{m >= n} |d_m|, so isolated
    near-zeros of the boundary term do not distort the slope.
    """
    ns = sorted(ns)
    patch = seed_unstable_disk(f, x, r, alpha.degree + 1, max_edge=max_edge, seed=seed)
    out = []
    cur = 0
    for n in ns:
        while cur < n:
            patch = iterate_refine(f, patch, max_edge)
            cur += 1
        out.append(boundary_term(patch, alpha) / patch_volume(patch))
    mags = np.abs(np.array(out))
    if np.all(mags == 0):
        return DefectDecay(tuple(ns), tuple(out), 0.0)
    env = np.maximum.accumulate(mags[::-1])[::-1]
    env = np.maximum(env, 1e-300)
    slope, _, _ = fit_line(ns, np.log(env))
    return DefectDecay(tuple(ns), tuple(out), float(math.exp(slope)))


def current_class(patch: PolyPatch) -> np.ndarray:
    """(C(dx_I))_I over the lexicographic basis of k-forms, normalised by Vol."""
    from .forms import basis_forms

    n = patch.points.shape[1]
    return np.array([evaluate_current(patch, w).value for w in basis_forms(n, patch.degree)])


# ---------------------------------------------------------------------------
# Jacobian criterion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JacobianGap:
    min_ratio: float
    argmin: np.ndarray
    samples: int

    @property
    def holds(self) -> bool:
        return self.min_ratio > 1.0


def jacobian_gap(f, k: int, samples: int = 10_000, seed: int = 0,
                 n_warm: int = N_WARM) -> JacobianGap:
    """min over sample points of J_k / J_{k-1}.

    J_k is the k-volume expansion of Df on the unstable k-plane, J_{k-1} the
    product of the k-1 largest singular values of Df (J_0 = 1).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    n = f.dim
    pts = qmc.Halton(d=n, scramble=True, seed=seed).random(samples)
    Df = f.differential(pts)
    sv = np.linalg.svd(Df, compute_uv=False)
    try:
        U = unstable_frames(f, pts, k, n_warm=n_warm, seed=seed)
        DU = Df @ U
        gram = np.swapaxes(DU, -1, -2) @ DU
        Jk = np.sqrt(np.abs(np.linalg.det(gram)))
    except UnstableDirectionError:
        # no dominated k-plane: the best k-volume expansion is all one can say
        Jk = np.prod(sv[:, :k], axis=1)
    Jk1 = np.prod(sv[:, : k - 1], axis=1) if k > 1 else np.ones(samples)
    ratio = Jk / Jk1
    i = int(np.argmin(ratio))
    return JacobianGap(float(ratio[i]), pts[i], samples)
