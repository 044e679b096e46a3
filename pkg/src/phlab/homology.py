"""Action of a toral automorphism on H_k(T^n, R).

H_k of the torus is spanned by the classes e_I = e_{i1} ^ ... ^ e_{ik} (I a
lexicographically ordered k-subset), and a map homotopic to x -> A x acts on
it by the k-th exterior power of A: the matrix of k x k minors.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

import numpy as np

from .torus import IntegerMatrix, _int_det


class SpectrumError(RuntimeError):
    """The polynomial root finder failed to produce a trustworthy spectrum."""


class GrowthPreconditionError(ValueError):
    """The unstable dimension of A does not match the requested degree."""


class NonSimpleDominantError(ValueError):
    """The dominant eigenvalue of the exterior power is not simple."""


def k_subsets(n: int, k: int) -> list:
    return list(combinations(range(n), k))


@dataclass(frozen=True, eq=False)
class HomologyAction:
    base: IntegerMatrix
    degree: int
    matrix: np.ndarray  # int64, C(n,k) x C(n,k)

    @property
    def basis(self) -> list:
        return k_subsets(self.base.n, self.degree)


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: tuple  # complex, sorted by modulus descending
    dominant_modulus: float
    dominant_simple: bool


@dataclass(frozen=True)
class HomologyClass:
    coords: np.ndarray
    degree: int

    def __post_init__(self):
        norm = float(np.linalg.norm(self.coords))
        if not np.isclose(norm, 1.0, atol=1e-12):
            raise ValueError(f"homology class must have unit norm, got {norm}")


def exterior_power(A, k: int) -> HomologyAction:
    """Lambda^k A: entry (I, J) is the minor of A with rows I and columns J."""
    if not isinstance(A, IntegerMatrix):
        A = IntegerMatrix(A)
    n = A.n
    if not 1 <= k <= n:
        raise ValueError(f"degree must satisfy 1 <= k <= {n}, got {k}")
    subsets = k_subsets(n, k)
    a = A.entries
    m = np.empty((len(subsets), len(subsets)), dtype=np.int64)
    for r, I in enumerate(subsets):
        for c, J in enumerate(subsets):
            m[r, c] = _int_det(a[np.ix_(I, J)].tolist())
    return HomologyAction(A, k, m)


def charpoly(M: np.ndarray) -> list:
    """Coefficients [1, c_1, ..., c_n] of det(x I - M), exact.

    Faddeev-LeVerrier: N_1 = I, c_k = -tr(M N_k)/k, N_{k+1} = M N_k + c_k I.
    Everything stays in Python integers; the divisions are exact.
    """
    M = [[int(v) for v in row] for row in np.asarray(M).tolist()]
    n = len(M)

    def matmul(X, Y):
        return [[sum(X[i][t] * Y[t][j] for t in range(n)) for j in range(n)] for i in range(n)]

    coeffs = [1]
    N = [[int(i == j) for j in range(n)] for i in range(n)]
    for k in range(1, n + 1):
        MN = matmul(M, N)
        tr = sum(MN[i][i] for i in range(n))
        c = Fraction(-tr, k)
        if c.denominator != 1:
            raise ArithmeticError("non-integer Faddeev-LeVerrier coefficient")
        c = int(c)
        coeffs.append(c)
        N = [[MN[i][j] + (c if i == j else 0) for j in range(n)] for i in range(n)]
    return coeffs


def _refine(M: np.ndarray, mu: complex, iters: int = 3) -> complex:
    """Inverse iteration from the shift mu, finished by a Rayleigh quotient."""
    n = M.shape[0]
    Mc = M.astype(complex)
    shift = mu + 1e-10 * (1 + abs(mu))
    B = Mc - shift * np.eye(n)
    v = np.ones(n, dtype=complex) / np.sqrt(n)
    try:
        for _ in range(iters):
            w = np.linalg.solve(B, v)
            nw = np.linalg.norm(w)
            if not np.isfinite(nw) or nw == 0:
                return mu
            v = w / nw
    except np.linalg.LinAlgError:
        return mu
    lam = np.vdot(v, Mc @ v) / np.vdot(v, v)
    resid = np.linalg.norm(Mc @ v - lam * v)
    # multiple roots come out of np.roots with O(eps^(1/m)) error, hence the loose window
    near = abs(lam - mu) < 1e-2 * (1 + abs(mu))
    if near and resid <= 1e-9 * (1 + np.linalg.norm(Mc)):
        return complex(lam)
    return mu


def spectrum(h) -> SpectrumReport:
    """All eigenvalues (with multiplicity) of an integer matrix or HomologyAction."""
    M = h.matrix if isinstance(h, HomologyAction) else np.asarray(h)
    coeffs = charpoly(M)
    try:
        roots = np.roots(np.array(coeffs, dtype=float))
    except np.linalg.LinAlgError as exc:
        raise SpectrumError(f"root finder failed: {exc}") from exc
    if len(roots) != M.shape[0] or not np.all(np.isfinite(roots)):
        raise SpectrumError(
            f"root finder returned {len(roots)} finite roots for degree {M.shape[0]}"
        )
    ev = np.array([_refine(M, r) for r in roots])
    ev = np.where(np.abs(ev.imag) < 1e-12 * (1 + np.abs(ev)), ev.real + 0j, ev)
    order = np.lexsort((-ev.imag, -ev.real, -np.round(np.abs(ev), 12)))
    ev = ev[order]
    mods = np.abs(ev)
    top = float(mods[0])
    simple = bool(np.sum(np.isclose(mods, top, rtol=1e-9, atol=0.0)) == 1)
    return SpectrumReport(tuple(complex(e) for e in ev), top, simple)


def unstable_dimension(A) -> int:
    if not isinstance(A, IntegerMatrix):
        A = IntegerMatrix(A)
    mods = np.abs(np.array(spectrum(A.entries).eigenvalues))
    return int(np.sum(mods > 1.0 + 1e-9))


def topological_growth(A, k: int):
    """(lambda_W, unique): dominant modulus of Lambda^k A and whether it is simple.

    Requires the unstable bundle of A to be exactly k-dimensional.
    """
    if not isinstance(A, IntegerMatrix):
        A = IntegerMatrix(A)
    mods = np.abs(np.array(spectrum(A.entries).eigenvalues))
    n_unstable = int(np.sum(mods > 1.0 + 1e-9))
    if n_unstable != k:
        raise GrowthPreconditionError(
            f"unstable dimension {n_unstable} != k = {k}; eigenvalue moduli "
            f"{np.round(mods, 9).tolist()}"
        )
    rep = spectrum(exterior_power(A, k))
    return rep.dominant_modulus, rep.dominant_simple


def unstable_homology_class(A, k: int) -> HomologyClass:
    """Unit eigenvector of Lambda^k A for its dominant eigenvalue.

    Sign convention: first nonzero coordinate positive.
    """
    if not isinstance(A, IntegerMatrix):
        A = IntegerMatrix(A)
    lam, unique = topological_growth(A, k)
    if not unique:
        raise NonSimpleDominantError(f"dominant eigenvalue of Lambda^{k} A is not simple")
    h = exterior_power(A, k)
    M = h.matrix.astype(float)
    rep = spectrum(h)
    mu = rep.eigenvalues[0]
    if abs(mu.imag) > 1e-9:
        raise NonSimpleDominantError("dominant eigenvalue is not real")
    mu = mu.real
    n = M.shape[0]
    B = M - (mu + 1e-9 * (1 + abs(mu))) * np.eye(n)
    v = np.ones(n) / np.sqrt(n)
    for _ in range(6):
        v = np.linalg.solve(B, v)
        v /= np.linalg.norm(v)
    v = _fix_sign(v)
    return HomologyClass(v, k)


def _fix_sign(v: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    nz = np.flatnonzero(np.abs(v) > tol)
    if nz.size and v[nz[0]] < 0:
        v = -v
    v = np.where(np.abs(v) > tol, v, 0.0)
    return v / np.linalg.norm(v)


def check_eigen_relation(h: HomologyAction, v: HomologyClass, lam: float) -> float:
    """||M v - lam v|| / ||v||."""
    if h.degree != v.degree:
        raise ValueError(f"degree mismatch: action {h.degree}, class {v.degree}")
    x = np.asarray(v.coords, dtype=float)
    return float(np.linalg.norm(h.matrix @ x - lam * x) / np.linalg.norm(x))
