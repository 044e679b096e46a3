"""Topological entropy from (n, eps)-separated sets and measure entropy from partition coding."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .foliation import fit_line
from .torus import SuspensionTimeMap

# a separated set counts as saturated once its Bowen balls hold fewer than this
# many sample points on average
MIN_POINTS_PER_BALL = 128
FIT_START = 2


class SaturationError(RuntimeError):
    """Every eps in the ladder saturates the sample before a rate can be fitted."""


@dataclass(frozen=True)
class SampleSpec:
    """Jittered grid: one uniform point in each cell of a product grid."""

    resolution: tuple
    seed: int = 0

    def __post_init__(self):
        res = tuple(int(r) for r in self.resolution)
        if not res or min(res) < 1:
            raise ValueError("resolution entries must be positive")
        object.__setattr__(self, "resolution", res)

    @property
    def size(self) -> int:
        return int(np.prod(self.resolution))

    @property
    def spacing(self) -> float:
        return 1.0 / min(self.resolution)

    def points(self) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        axes = [np.arange(r) for r in self.resolution]
        idx = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
        res = np.array(self.resolution, dtype=float)
        return (idx + rng.random(idx.shape)) / res

    def order(self) -> np.ndarray:
        """Admission order; a seeded random permutation of the sample."""
        return np.random.default_rng(self.seed + 1).permutation(self.size).astype(np.int64)


@dataclass(frozen=True)
class SeparatedSetTable:
    entries: dict  # (n, eps) -> s(n, eps)
    sample_size: int
    resolution: tuple
    seed: int
    mode: str

    def counts(self, eps: float) -> list:
        ns = sorted(n for n, e in self.entries if e == eps)
        return [self.entries[(n, eps)] for n in ns]

    def is_monotone(self) -> bool:
        eps_values = sorted({e for _, e in self.entries})
        ns = sorted({n for n, _ in self.entries})
        for e in eps_values:
            c = self.counts(e)
            if any(b < a for a, b in zip(c, c[1:])):
                return False
        for n in ns:
            c = [self.entries[(n, e)] for e in eps_values]  # eps increasing
            if any(b > a for a, b in zip(c, c[1:])):
                return False
        return True


@dataclass(frozen=True)
class EpsFit:
    eps: float
    rate: float
    r2: float
    n_range: tuple
    saturated_at: int | None  # first saturated n, None if never


@dataclass(frozen=True)
class EntropyEstimate:
    h_of_eps: tuple  # (eps, rate) pairs, eps decreasing
    h_hat: float
    eps_used: float
    fits: tuple
    table: SeparatedSetTable


# ---------------------------------------------------------------------------
# orbit segments
# ---------------------------------------------------------------------------


def _sup_lipschitz(f) -> float:
    """Bound on ||Df||_inf (max row sum) used to validate the lifted hash."""
    lin = getattr(f, "linear", None)
    if lin is None:
        return math.inf
    a = np.abs(lin.entries).sum(axis=1).max()
    pert = getattr(f, "perturbation", None)
    if pert is not None:
        lip = 0.0 if pert.is_zero else pert.amplitude * sum(
            max(abs(c) for c in t.coefficient) * 2 * math.pi * sum(abs(k) for k in t.frequency)
            for t in pert.terms
        )
        return float(a + lip)
    forward = getattr(f, "forward", None)
    if forward is not None:
        inv = np.abs(forward.linear.inverse().entries).sum(axis=1).max()
        lip = _sup_lipschitz(forward) - np.abs(forward.linear.entries).sum(axis=1).max()
        q = inv * lip
        return float(inv / (1 - q)) if q < 1 else math.inf
    return float(a)


def _lifted_ok(f, eps: float) -> bool:
    if isinstance(f, SuspensionTimeMap):
        if f.t <= 0:
            return False
        A = f.flow.base_map
        # one step crosses the roof at most ceil(t) times
        L = np.abs(A.power(math.ceil(f.t))).sum(axis=1).max()
        return L * eps < 1.0 - eps
    return hasattr(f, "apply_lift") and _sup_lipschitz(f) * eps < 1.0 - eps


def orbit_segments(f, x: np.ndarray, n_max: int, dtype=np.float64) -> np.ndarray:
    """Wrapped orbit segments (N, n_max+1, D) with orb[i, t] = f^t(x_i)."""
    x = np.asarray(x, dtype=float)
    N, D = x.shape
    orb = np.empty((N, n_max + 1, D), dtype=dtype)
    orb[:, 0] = x
    cur = x
    for t in range(n_max):
        if hasattr(f, "apply_lift"):
            lift = f.apply_lift(cur)
            cur = lift - np.floor(lift)
        else:
            cur = f.apply(cur)
        orb[:, t + 1] = cur
    return orb


# ---------------------------------------------------------------------------
# separated sets
# ---------------------------------------------------------------------------


class _Counter:
    """Greedy separated-set counts over one sample, sharing orbit segments across queries."""

    def __init__(self, f, sample: np.ndarray, n_max: int, eps_max: float, order=None):
        self.f = f
        self.susp = isinstance(f, SuspensionTimeMap)
        self.lifted = _lifted_ok(f, eps_max)
        # single precision halves memory; separations are compared against eps >> 1e-7
        self.orb = orbit_segments(f, sample, n_max, dtype=np.float32)
        self.x0 = sample
        self._lift = (0, sample)
        self.order = (np.arange(len(sample), dtype=np.int64) if order is None
                      else np.asarray(order, dtype=np.int64))
        if self.susp:
            self.A = f.flow.base_map.entries.astype(float)
        elif hasattr(f, "linear"):
            self.A = f.linear.entries.astype(float)
        else:
            self.A = np.eye(sample.shape[1])

    @property
    def mode(self) -> str:
        return "lifted" if self.lifted else "wrapped"

    def _cover_coordinates(self, n: int):
        """Normalized cover coordinates (A^m x, h + n t - m) of the time-n states."""
        x = self.x0[:, :2]
        H = self.x0[:, 2] + n * self.f.t
        m = np.floor(H).astype(np.int64)
        eta = H - m
        top = int(m.max()) + 2
        Apow = np.stack([self.f.flow.base_map.power(j).astype(float) for j in range(top)])
        X = np.einsum("nij,nj->ni", Apow[m], x)
        return X, eta, m, Apow

    def lifted_at(self, n: int) -> np.ndarray:
        """f^n(x) on the lift, computed from x in [0,1)^D."""
        m, y = self._lift
        if m > n:
            m, y = 0, self.x0
        for _ in range(n - m):
            y = self.f.apply_lift(y)
        self._lift = (n, y)
        return y

    def admit(self, n: int, eps: float, seed=None) -> np.ndarray:
        seed = np.empty(0, np.int64) if seed is None else np.asarray(seed, dtype=np.int64)
        orb = np.ascontiguousarray(self.orb[:, : n + 1])
        if self.lifted and self.susp:
            X, eta, m, Apow = self._cover_coordinates(n)
            Ainv = self.f.flow.base_map.inverse().entries.astype(float)
            return _kernels.greedy_separated_suspension(orb, X, eta, m, Apow, Ainv, eps,
                                                        self.order, seed)
        if self.lifted:
            shift = np.linalg.matrix_power(self.A, n)
            return _kernels.greedy_separated_lifted(orb, self.lifted_at(n), shift, eps, self.order, seed)
        M = max(1, int(math.floor(1.0 / (2.0 * eps))))
        key_times = np.array([0, n] if n > 0 else [0], dtype=np.int64)
        return _kernels.greedy_separated(orb, eps, self.order, seed, key_times,
                                         self.susp, self.A, M)


def count_separated(f, n: int, eps: float, sample: np.ndarray, order=None) -> int:
    """Size of the greedy (n, eps)-separated subset of ``sample``, admitted in ``order``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    c = _Counter(f, np.asarray(sample, dtype=float), n, eps, order)
    return int(len(c.admit(n, eps)))


def separated_table(f, eps_ladder, n_max: int, sample: SampleSpec) -> SeparatedSetTable:
    """s(n, eps) for the whole ladder.

    The set for (n, eps) starts from the larger of the sets found for (n-1, eps)
    and (n, eps') with eps' the previous, larger eps. Both are (n, eps)-separated,
    so greedy extension keeps the table monotone in n and in eps.
    """
    eps_ladder = list(eps_ladder)
    if any(b >= a for a, b in zip(eps_ladder, eps_ladder[1:])):
        raise ValueError("eps_ladder must be strictly decreasing")
    c = _Counter(f, sample.points(), n_max, max(eps_ladder), sample.order())
    entries = {}
    prev_eps = {}
    for eps in eps_ladder:
        cur = {}
        before = np.empty(0, np.int64)
        for n in range(n_max + 1):
            seed = max((before, prev_eps.get(n, np.empty(0, np.int64))), key=len)
            adm = c.admit(n, eps, seed)
            cur[n] = adm
            before = adm
            entries[(n, float(eps))] = int(len(adm))
        prev_eps = cur
    return SeparatedSetTable(entries, sample.size, sample.resolution, sample.seed, c.mode)


def _fit_eps(counts: list, eps: float, sample_size: int, fit_start: int) -> EpsFit:
    limit = sample_size / MIN_POINTS_PER_BALL
    sat = next((n for n, s in enumerate(counts) if s > limit), None)
    last = (len(counts) - 1) if sat is None else sat - 1
    ns = list(range(fit_start, last + 1))
    if len(ns) < 2:
        return EpsFit(eps, math.nan, math.nan, (fit_start, last), sat)
    slope, _, r2 = fit_line(ns, np.log([counts[n] for n in ns]))
    return EpsFit(eps, slope, r2, (fit_start, last), sat)


def fit_table(table: SeparatedSetTable, eps_ladder, fit_start: int = FIT_START,
              min_points: int = 3) -> EntropyEstimate:
    fits = [_fit_eps(table.counts(float(e)), float(e), table.sample_size, fit_start)
            for e in eps_ladder]
    good = [ft for ft in fits if ft.n_range[1] - ft.n_range[0] + 1 >= min_points]
    if not good:
        good = [ft for ft in fits if not math.isnan(ft.rate)]
    if not good:
        raise SaturationError(
            "all eps saturated: refine the sample or raise the smallest eps "
            f"(sample size {table.sample_size}, ladder {list(eps_ladder)})"
        )
    best = min(good, key=lambda ft: ft.eps)
    return EntropyEstimate(
        tuple((ft.eps, ft.rate) for ft in fits), max(0.0, best.rate), best.eps, tuple(fits), table
    )


def estimate_topological_entropy(f, eps_ladder, n_max: int, sample: SampleSpec,
                                 fit_start: int = FIT_START) -> EntropyEstimate:
    """h(f, eps) for each eps in the ladder and h_hat at the smallest reliable eps.

    Rates are fitted on ln s(n, eps) for n from ``fit_start`` up to the last n
    before saturation.
    """
    if sample.spacing >= min(eps_ladder):
        raise SaturationError(
            f"all eps saturated: sample spacing {sample.spacing:.3g} is not finer "
            f"than the smallest eps {min(eps_ladder)}"
        )
    table = separated_table(f, eps_ladder, n_max, sample)
    return fit_table(table, eps_ladder, fit_start)


def flow_fit_start(t: float, transient: float = 2.0) -> int:
    """First fitted iterate of a time-t map, skipping about ``transient`` flow time."""
    if t <= 0:
        raise ValueError("t must be positive")
    return max(1, round(transient / t))


@dataclass(frozen=True)
class FactorizedEntropy:
    h_hat: float
    blocks: tuple
    factors: tuple  # EntropyEstimate per block


def estimate_topological_entropy_by_factors(f, eps_ladder, n_max: int, resolution: int,
                                            seed: int = 0,
                                            fit_start: int = FIT_START) -> FactorizedEntropy:
    """Topological entropy of a toral map as the sum over its decoupled factors.

    Entropy of a product map is the sum of the factor entropies, so each block is
    estimated on its own jittered grid with ``resolution`` points per axis.
    """
    blocks = decoupled_factors(f) if hasattr(f, "perturbation") else [tuple(range(f.dim))]
    ests = []
    for j, b in enumerate(blocks):
        g = restrict_to_block(f, b) if len(blocks) > 1 else f
        ests.append(estimate_topological_entropy(
            g, eps_ladder, n_max, SampleSpec((resolution,) * len(b), seed + j), fit_start))
    return FactorizedEntropy(float(sum(e.h_hat for e in ests)), tuple(blocks), tuple(ests))


def exact_max_separated(f, n: int, eps: float, sample: np.ndarray, limit: int = 64) -> int:
    """Maximum (n, eps)-separated subset by branch and bound (small samples only)."""
    sample = np.asarray(sample, dtype=float)
    if len(sample) > limit:
        raise ValueError(f"exact search is limited to {limit} points")
    orb = orbit_segments(f, sample, n)
    gaps = np.abs(orb[:, None] - orb[None, :])
    gaps = np.minimum(gaps, 1.0 - gaps).max(axis=-1).max(axis=-1)
    conflict = gaps < eps
    np.fill_diagonal(conflict, False)
    nbrs = [set(np.flatnonzero(row)) for row in conflict]
    best = 0

    def grow(chosen: int, cand: list):
        nonlocal best
        if chosen + len(cand) <= best:
            return
        if not cand:
            best = max(best, chosen)
            return
        v = cand[0]
        grow(chosen + 1, [u for u in cand[1:] if u not in nbrs[v]])
        grow(chosen, cand[1:])

    grow(0, sorted(range(len(sample)), key=lambda i: len(nbrs[i])))
    return best


# ---------------------------------------------------------------------------
# measure entropy
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridPartition:
    """Half-open boxes prod [j/r_d, (j+1)/r_d) tiling the unit cube."""

    resolution: tuple

    def __post_init__(self):
        res = tuple(int(r) for r in self.resolution)
        if not res or min(res) < 1:
            raise ValueError("resolution entries must be positive")
        object.__setattr__(self, "resolution", res)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.resolution))

    def cell(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return _kernels.code_orbit_cells(np.ascontiguousarray(x),
                                         np.array(self.resolution, dtype=np.int64))


@dataclass(frozen=True)
class MeasureEntropyEstimate:
    h: float
    conditional: tuple  # H(xi | next m cells) for m = 0, 1, ...
    plateau_m: int | None
    rare_context_fraction: float  # share of words whose conditioning word is seen < 10 times
    biased_low: bool


def _entropy_of_counts(counts: np.ndarray) -> float:
    p = counts / counts.sum()
    return float(-np.sum(p * np.log(p)))


def code_orbits(f, partition: GridPartition, orbit_length: int, burn_in: int = 100,
                seed: int = 0, chains: int = 4096) -> np.ndarray:
    """Cell ids (chains, steps) of volume-distributed orbits of f."""
    steps = max(1, orbit_length // chains)
    rng = np.random.default_rng(seed)
    x = rng.random((chains, len(partition.resolution)))
    for _ in range(burn_in):
        x = f.apply(x)
    codes = np.empty((chains, steps), dtype=np.int64)
    for t in range(steps):
        codes[:, t] = partition.cell(x)
        x = f.apply(x)
    return codes


def conditional_entropies(codes: np.ndarray, base: int, m_max: int, tol: float = 0.01,
                          rare: int = 10) -> MeasureEntropyEstimate:
    """Plateau of H(words of length m+1) - H(words of length m) over coded orbits.

    Words never straddle two chains. Deepening stops early once the plug-in
    bias of the longer words, (distinct words) / (2 * samples), exceeds tol.
    """
    ids = codes
    _, counts = np.unique(ids.ravel(), return_counts=True)
    H_prev = _entropy_of_counts(counts)
    cond = [H_prev]
    rare_frac = [0.0]
    plateau = None
    for m in range(1, m_max + 1):
        if ids.shape[1] < 2:
            break
        pair = ids[:, :-1] * base + codes[:, m:]
        uniq, inv, counts = np.unique(pair.ravel(), return_inverse=True, return_counts=True)
        if len(uniq) / (2.0 * pair.size) > tol:
            break
        # how often the length-m prefix of each retained word occurs
        ctx = ids[:, :-1].ravel()
        _, ctx_inv, ctx_counts = np.unique(ctx, return_inverse=True, return_counts=True)
        rare_frac.append(float(np.mean(ctx_counts[ctx_inv] < rare)))
        H = _entropy_of_counts(counts)
        cond.append(H - H_prev)
        H_prev = H
        ids = inv.reshape(pair.shape)
        if m >= 2 and abs(cond[-1] - cond[-2]) < tol:
            plateau = m
            break
    m_used = plateau if plateau is not None else len(cond) - 1
    return MeasureEntropyEstimate(max(0.0, cond[m_used]), tuple(cond), plateau,
                                  rare_frac[m_used], rare_frac[m_used] > 0.01)


def estimate_measure_entropy(f, partition: GridPartition, orbit_length: int = 10**7,
                             burn_in: int = 100, seed: int = 0, m_max: int = 12,
                             chains: int = 4096, tol: float = 0.01) -> MeasureEntropyEstimate:
    """h_nu(f, xi) for nu = volume, from coded orbits.

    ``chains`` volume-distributed orbits are run in parallel and pooled, each of
    length orbit_length / chains after ``burn_in`` steps. The estimate is the
    first conditional entropy H(xi | f^-1 xi v ... v f^-m xi) that differs from
    its predecessor by less than ``tol``.
    """
    codes = code_orbits(f, partition, orbit_length, burn_in, seed, chains)
    return conditional_entropies(codes, partition.n_cells, m_max, tol)


def decoupled_factors(f) -> list:
    """Coordinate blocks of a toral map that evolve independently.

    Two coordinates are coupled when the linear part mixes them or a
    perturbation term reads one and writes the other.
    """
    n = f.dim
    lin = getattr(f, "linear", None)
    if lin is None:
        return [tuple(range(n))]
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i, j):
        parent[find(i)] = find(j)

    a = lin.entries
    for i in range(n):
        for j in range(n):
            if a[i, j] != 0:
                union(i, j)
    pert = getattr(f, "perturbation", None)
    if pert is not None and not pert.is_zero:
        for t in pert.terms:
            touched = [i for i in range(n) if t.coefficient[i] != 0 or t.frequency[i] != 0]
            for i in touched[1:]:
                union(touched[0], i)
    blocks = {}
    for i in range(n):
        blocks.setdefault(find(i), []).append(i)
    return [tuple(b) for b in sorted(blocks.values())]


def restrict_to_block(f, block: tuple):
    """The factor map on the coordinates in ``block`` of a decoupled toral map."""
    from .torus import IntegerMatrix, ToralDiffeo, TrigPerturbation, TrigTerm

    idx = list(block)
    A = IntegerMatrix(f.linear.entries[np.ix_(idx, idx)])
    terms = []
    for t in f.perturbation.terms:
        if any(t.coefficient[i] != 0 for i in idx):
            terms.append(TrigTerm(tuple(t.coefficient[i] for i in idx),
                                  tuple(t.frequency[i] for i in idx), t.kind))
    return ToralDiffeo(A, TrigPerturbation(tuple(terms), f.perturbation.amplitude))


@dataclass(frozen=True)
class FactorizedMeasureEntropy:
    h: float
    blocks: tuple
    factors: tuple  # MeasureEntropyEstimate per block


def measure_entropy_by_factors(f, resolution=2, orbit_length: int = 4 * 10**6,
                               burn_in: int = 100, seed: int = 0, m_max: int = 12,
                               tol: float = 0.01) -> FactorizedMeasureEntropy:
    """Volume entropy of a toral map as the sum over its decoupled factors.

    For a product map with product volume, entropy is additive over factors and
    the product grid partition codes each factor independently. ``resolution`` is
    an int or one int per coordinate; blocks use their own coordinates' entries.
    """
    res = (resolution,) * f.dim if np.isscalar(resolution) else tuple(resolution)
    blocks = decoupled_factors(f) if hasattr(f, "perturbation") else [tuple(range(f.dim))]
    ests = []
    for j, b in enumerate(blocks):
        g = restrict_to_block(f, b) if len(blocks) > 1 else f
        part = GridPartition(tuple(res[i] for i in b))
        ests.append(estimate_measure_entropy(g, part, orbit_length, burn_in, seed + j, m_max,
                                             tol=tol))
    return FactorizedMeasureEntropy(float(sum(e.h for e in ests)), tuple(blocks), tuple(ests))
