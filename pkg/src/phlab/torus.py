"""Phase spaces and map families.

Points on the n-torus are plain float arrays with coordinates in [0, 1); a batch
of points is an array of shape (N, n). Every map is evaluated on a lift in R^n
and then reduced mod 1, so lifts of curves stay connected when a caller keeps
the integer part.

Families:
  * ``ToralDiffeo``: f(x) = A x + p(x) with A unimodular and p a trigonometric
    polynomial small enough that f stays a diffeomorphism.
  * ``SuspensionFlow``: unit-roof suspension of a hyperbolic 2x2 automorphism,
    living on the mapping torus T^2 x [0,1) / (x,1) ~ (Ax,0).
  * ``CircleMap``: y -> y + c (sin 2 pi y - sin^2 2 pi y) + eps.
  * ``SkewProductMap``: (q, y) -> (flow time 1 + sin 2 pi y applied to q, alpha(y)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

TWO_PI = 2.0 * math.pi

INVERT_MAX_ITER = 200
INVERT_TOL = 1e-13


class DiffeomorphismBoundError(ValueError):
    """The perturbation is too large for the certified diffeomorphism bound."""


class InversionError(RuntimeError):
    """Fixed-point inversion did not converge inside its iteration budget."""


def wrap(x: np.ndarray) -> np.ndarray:
    """Reduce coordinates mod 1 into [0, 1)."""
    y = np.mod(x, 1.0)
    # np.mod can return exactly 1.0 for tiny negative inputs
    y[y >= 1.0] = 0.0
    return y


def torus_displacement(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Shortest displacement y - x on the torus, coordinate by coordinate."""
    d = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    return d - np.round(d)


def torus_distance(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Euclidean quotient distance on R^n / Z^n.

    Per-coordinate wrap-around equals the minimum over the 3^n nearest integer
    translates for points already reduced to [0, 1).
    """
    return np.linalg.norm(torus_displacement(x, y), axis=-1)


def torus_sup_distance(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Sup-norm quotient distance (max over coordinates of the wrapped gap)."""
    return np.max(np.abs(torus_displacement(x, y)), axis=-1)


# ---------------------------------------------------------------------------
# Integer matrices
# ---------------------------------------------------------------------------


def _int_det(m: Sequence[Sequence[int]]) -> int:
    """Exact determinant by fraction-free Bareiss elimination."""
    a = [[int(v) for v in row] for row in m]
    n = len(a)
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if a[i][k] != 0), None)
            if swap is None:
                return 0
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1] if n else 1


@dataclass(frozen=True, eq=False)
class IntegerMatrix:
    """Square integer matrix with determinant +-1."""

    entries: np.ndarray
    det: int = field(init=False)

    def __post_init__(self):
        a = np.asarray(self.entries)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"matrix must be square, got shape {a.shape}")
        if not np.all(a == np.round(a)):
            raise ValueError("matrix entries must be integers")
        a = a.astype(np.int64)
        a.setflags(write=False)
        d = _int_det(a.tolist())
        if abs(d) != 1:
            raise ValueError(f"|det| must be 1, got det = {d}")
        object.__setattr__(self, "entries", a)
        object.__setattr__(self, "det", d)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def inverse(self) -> "IntegerMatrix":
        inv = np.linalg.inv(self.entries.astype(float))
        return IntegerMatrix(np.round(inv).astype(np.int64))

    def power(self, m: int) -> np.ndarray:
        """A^m as an int64 array (negative m uses the inverse)."""
        base = self.entries if m >= 0 else self.inverse().entries
        return np.linalg.matrix_power(base, abs(m))

    def __matmul__(self, other: "IntegerMatrix") -> "IntegerMatrix":
        return IntegerMatrix(self.entries @ other.entries)

    def __eq__(self, other):
        return isinstance(other, IntegerMatrix) and np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash(self.entries.tobytes())

    def tolist(self) -> list:
        return self.entries.tolist()


def block_diag(*blocks: IntegerMatrix) -> IntegerMatrix:
    n = sum(b.n for b in blocks)
    out = np.zeros((n, n), dtype=np.int64)
    i = 0
    for b in blocks:
        out[i:i + b.n, i:i + b.n] = b.entries
        i += b.n
    return IntegerMatrix(out)


# ---------------------------------------------------------------------------
# Trigonometric perturbations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrigTerm:
    """One term coefficient * trig(2 pi <frequency, x>), trig in {sin, cos}."""

    coefficient: tuple
    frequency: tuple
    kind: str = "sin"

    def __post_init__(self):
        if self.kind not in ("sin", "cos"):
            raise ValueError(f"kind must be 'sin' or 'cos', got {self.kind!r}")
        if len(self.coefficient) != len(self.frequency):
            raise ValueError("coefficient and frequency lengths differ")
        if any(int(k) != k for k in self.frequency):
            raise ValueError("frequencies must be integers")
        object.__setattr__(self, "coefficient", tuple(float(c) for c in self.coefficient))
        object.__setattr__(self, "frequency", tuple(int(k) for k in self.frequency))

    def lipschitz(self) -> float:
        return math.hypot(*self.coefficient) * TWO_PI * math.hypot(*self.frequency)


@dataclass(frozen=True)
class TrigPerturbation:
    """p(x) = amplitude * sum of trig terms; Z^n-periodic by construction."""

    terms: tuple = ()
    amplitude: float = 0.0

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("amplitude must be >= 0")
        object.__setattr__(self, "terms", tuple(self.terms))
        dims = {len(t.frequency) for t in self.terms}
        if len(dims) > 1:
            raise ValueError("terms have mixed dimensions")

    @property
    def is_zero(self) -> bool:
        return self.amplitude == 0.0 or not self.terms

    def lipschitz_bound(self) -> float:
        """Upper bound on the operator norm of Dp."""
        return self.amplitude * sum(t.lipschitz() for t in self.terms)

    def _coef_freq(self):
        c = np.array([t.coefficient for t in self.terms], dtype=float)
        k = np.array([t.frequency for t in self.terms], dtype=float)
        is_sin = np.array([t.kind == "sin" for t in self.terms])
        return c, k, is_sin

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.is_zero:
            return np.zeros_like(x)
        c, k, is_sin = self._coef_freq()
        phase = TWO_PI * (x @ k.T)  # (..., m)
        vals = np.where(is_sin, np.sin(phase), np.cos(phase))
        return self.amplitude * (vals @ c)

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        n = x.shape[-1]
        if self.is_zero:
            return np.zeros(x.shape[:-1] + (n, n))
        c, k, is_sin = self._coef_freq()
        phase = TWO_PI * (x @ k.T)
        dvals = np.where(is_sin, np.cos(phase), -np.sin(phase)) * TWO_PI
        # sum_m dvals_m * c_m k_m^T
        return self.amplitude * np.einsum("...m,mi,mj->...ij", dvals, c, k)


# ---------------------------------------------------------------------------
# Toral diffeomorphisms
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ToralDiffeo:
    """f(x) = A x + p(x) mod 1."""

    linear: IntegerMatrix
    perturbation: TrigPerturbation = TrigPerturbation()

    def __post_init__(self):
        if not isinstance(self.linear, IntegerMatrix):
            object.__setattr__(self, "linear", IntegerMatrix(self.linear))
        p = self.perturbation
        if p.terms and len(p.terms[0].frequency) != self.linear.n:
            raise ValueError("perturbation dimension does not match the matrix")
        bound = p.lipschitz_bound()
        limit = 1.0 / self.inverse_norm
        if bound >= limit:
            raise DiffeomorphismBoundError(
                f"Lip(p) <= {bound:.4g} is not below 1/||A^-1|| = {limit:.4g}"
            )
        ainv = self.linear.inverse().entries
        object.__setattr__(self, "_a", self.linear.entries.astype(float))
        object.__setattr__(self, "_ainv", ainv.astype(float))

    @property
    def dim(self) -> int:
        return self.linear.n

    @property
    def inverse_norm(self) -> float:
        return float(np.linalg.norm(self.linear.inverse().entries.astype(float), 2))

    @property
    def contraction(self) -> float:
        """q = ||A^-1|| Lip(p); the inversion iteration contracts at rate q."""
        return self.inverse_norm * self.perturbation.lipschitz_bound()

    metric = "torus"

    def apply_lift(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x @ self._a.T + self.perturbation.evaluate(x)

    def apply(self, x: np.ndarray) -> np.ndarray:
        return wrap(self.apply_lift(x))

    def differential(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self._a + self.perturbation.jacobian(x)

    def invert_lift(self, y: np.ndarray) -> np.ndarray:
        """Solve A x + p(x) = y on R^n by the contraction x <- A^-1 (y - p(x))."""
        y = np.asarray(y, dtype=float)
        x = y @ self._ainv.T
        if self.perturbation.is_zero:
            return x
        for _ in range(INVERT_MAX_ITER):
            x_new = (y - self.perturbation.evaluate(x)) @ self._ainv.T
            step = np.max(np.abs(x_new - x)) if x.size else 0.0
            x = x_new
            if step <= INVERT_TOL * max(1.0, float(np.max(np.abs(x))) if x.size else 1.0):
                return x
        raise InversionError(
            f"inverse iteration did not converge in {INVERT_MAX_ITER} steps "
            f"(contraction factor {self.contraction:.3g}); diffeomorphism bound violated?"
        )

    def invert(self, y: np.ndarray) -> np.ndarray:
        return wrap(self.invert_lift(y))

    def inverse(self) -> "InverseToralDiffeo":
        return InverseToralDiffeo(self)


@dataclass(frozen=True, eq=False)
class InverseToralDiffeo:
    """f^-1 with the same evaluation interface as ``ToralDiffeo``."""

    forward: ToralDiffeo
    metric = "torus"

    @property
    def dim(self) -> int:
        return self.forward.dim

    @property
    def linear(self) -> IntegerMatrix:
        return self.forward.linear.inverse()

    def apply_lift(self, x):
        return self.forward.invert_lift(x)

    def apply(self, x):
        return wrap(self.apply_lift(x))

    def differential(self, x):
        pre = self.forward.invert_lift(x)
        return np.linalg.inv(self.forward.differential(pre))

    def invert_lift(self, y):
        return self.forward.apply_lift(y)

    def invert(self, y):
        return wrap(self.invert_lift(y))

    def inverse(self) -> ToralDiffeo:
        return self.forward


@dataclass(frozen=True)
class Rotation:
    """Translation x -> x + omega on the torus (an isometry)."""

    omega: tuple
    metric = "torus"

    @property
    def dim(self) -> int:
        return len(self.omega)

    @property
    def linear(self) -> IntegerMatrix:
        return IntegerMatrix(np.eye(self.dim, dtype=np.int64))

    def apply_lift(self, x):
        return np.asarray(x, dtype=float) + np.asarray(self.omega, dtype=float)

    def apply(self, x):
        return wrap(self.apply_lift(x))

    def differential(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.eye(self.dim), x.shape[:-1] + (self.dim, self.dim)).copy()

    def invert_lift(self, y):
        return np.asarray(y, dtype=float) - np.asarray(self.omega, dtype=float)

    def invert(self, y):
        return wrap(self.invert_lift(y))

    def inverse(self) -> "Rotation":
        return Rotation(tuple(-w for w in self.omega))


# ---------------------------------------------------------------------------
# Partial-hyperbolicity constants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PHConstants:
    """Rates 0 < lambda_s < lambda_c_lo <= 1 <= lambda_c_hi < lambda_u and c1 >= 1."""

    lambda_s: float
    lambda_c_lo: float
    lambda_c_hi: float
    lambda_u: float
    c1: float = 1.0

    def __post_init__(self):
        ok = (
            0 < self.lambda_s < self.lambda_c_lo <= 1.0 <= self.lambda_c_hi < self.lambda_u
        )
        if not ok:
            raise ValueError(
                "need 0 < lambda_s < lambda_c_lo <= 1 <= lambda_c_hi < lambda_u, got "
                f"({self.lambda_s}, {self.lambda_c_lo}, {self.lambda_c_hi}, {self.lambda_u})"
            )
        if self.c1 < 1:
            raise ValueError("c1 must be >= 1")


# ---------------------------------------------------------------------------
# Suspension flow on the mapping torus
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SuspensionFlow:
    """Unit-roof suspension of a hyperbolic 2x2 automorphism.

    States are arrays (..., 3): base point on T^2 followed by the height in [0,1).
    """

    base_map: IntegerMatrix

    def __post_init__(self):
        if not isinstance(self.base_map, IntegerMatrix):
            object.__setattr__(self, "base_map", IntegerMatrix(self.base_map))
        if self.base_map.n != 2:
            raise ValueError("suspension base must be a 2x2 matrix")
        ev = np.linalg.eigvals(self.base_map.entries.astype(float))
        if np.any(np.isclose(np.abs(ev), 1.0)):
            raise ValueError("base map must be hyperbolic (no eigenvalue on the unit circle)")

    def _powers(self, m: np.ndarray):
        out = {}
        for v in np.unique(m):
            out[int(v)] = self.base_map.power(int(v)).astype(float)
        return out

    def flow(self, q: np.ndarray, t) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        single = q.ndim == 1
        q2 = np.atleast_2d(q)
        h = q2[:, 2] + np.broadcast_to(np.asarray(t, dtype=float), q2.shape[:1])
        m = np.floor(h).astype(np.int64)
        height = h - m
        height[height >= 1.0] = 0.0
        base = q2[:, :2].copy()
        for v, P in self._powers(m).items():
            if v == 0:
                continue
            sel = m == v
            base[sel] = base[sel] @ P.T
        out = np.column_stack([wrap(base), height])
        return out[0] if single else out

    def distance(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        """Mapping-torus distance: min of the direct gap and both roof-crossed gaps."""
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        A = self.base_map.entries.astype(float)
        direct = np.maximum(torus_sup_distance(p[..., :2], q[..., :2]),
                            np.abs(p[..., 2] - q[..., 2]))
        pa = wrap(p[..., :2] @ A.T)
        qa = wrap(q[..., :2] @ A.T)
        via_p = np.maximum(torus_sup_distance(pa, q[..., :2]), np.abs(p[..., 2] - 1.0 - q[..., 2]))
        via_q = np.maximum(torus_sup_distance(p[..., :2], qa), np.abs(q[..., 2] - 1.0 - p[..., 2]))
        return np.minimum(direct, np.minimum(via_p, via_q))

    def time_map(self, t: float) -> "SuspensionTimeMap":
        return SuspensionTimeMap(self, float(t))


@dataclass(frozen=True, eq=False)
class SuspensionTimeMap:
    """The time-t map of a suspension flow, usable wherever a map is expected."""

    flow: SuspensionFlow
    t: float
    metric = "suspension"
    dim = 3

    def apply(self, q):
        return self.flow.flow(q, self.t)

    def inverse(self) -> "SuspensionTimeMap":
        return SuspensionTimeMap(self.flow, -self.t)


# ---------------------------------------------------------------------------
# Circle maps and the skew product
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CircleFixedPoint:
    y: float
    multiplier: float


@dataclass(frozen=True)
class CircleMap:
    """alpha_eps(y) = y + c (sin 2 pi y - sin^2 2 pi y) + eps on R/Z.

    At eps = 0 the fixed points are exactly 0, 1/4, 1/2 with multipliers
    1 + 2 pi c, 1, 1 - 2 pi c; the middle one is parabolic with
    alpha''(1/4) = 4 pi^2 c.
    """

    c: float
    epsilon: float = 0.0

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("c must be > 0")
        # g'(y) = 2 pi cos(2 pi y)(1 - 2 sin 2 pi y) has max |g'| <= 6 pi
        if 1.0 - self.c * self.max_shape_slope() <= 0:
            raise ValueError(f"c = {self.c} too large: alpha is not a circle diffeomorphism")

    @staticmethod
    def max_shape_slope() -> float:
        y = np.linspace(0.0, 1.0, 20001)
        return float(np.max(np.abs(_shape_d1(y))))

    def lift(self, y):
        y = np.asarray(y, dtype=float)
        return y + self.c * _shape(y) + self.epsilon

    def __call__(self, y):
        return np.mod(self.lift(y), 1.0)

    def derivative(self, y):
        return 1.0 + self.c * _shape_d1(np.asarray(y, dtype=float))

    def second_derivative(self, y):
        return self.c * _shape_d2(np.asarray(y, dtype=float))

    def displacement(self, y):
        """alpha(y) - y on the lift; fixed points are its zeros."""
        return self.c * _shape(np.asarray(y, dtype=float)) + self.epsilon

    def with_epsilon(self, eps: float) -> "CircleMap":
        return CircleMap(self.c, eps)

    def fixed_points(self, tol: float = 1e-10, grid: int = 4096) -> list:
        return circle_fixed_points(self, tol, grid)

    def annihilation_side(self) -> int:
        """Sign of eps for which the parabolic pair near y = 1/4 disappears.

        The displacement has a local extremum at the parabolic point; pushing it
        away from zero removes the pair. Determined from alpha'' at that point.
        """
        d2 = float(self.second_derivative(0.25))
        if d2 == 0.0:
            raise ValueError("alpha'' vanishes at the parabolic point")
        return 1 if d2 > 0 else -1


def _shape(y):
    s = np.sin(TWO_PI * y)
    return s - s * s


def _shape_d1(y):
    return TWO_PI * np.cos(TWO_PI * y) * (1.0 - 2.0 * np.sin(TWO_PI * y))


def _shape_d2(y):
    s = np.sin(TWO_PI * y)
    c = np.cos(TWO_PI * y)
    return TWO_PI ** 2 * (-s * (1.0 - 2.0 * s) - 2.0 * c * c)


def _circ_gap(a: float, b: float) -> float:
    d = abs(a - b) % 1.0
    return min(d, 1.0 - d)


def circle_fixed_points(alpha: CircleMap, tol: float = 1e-10, grid: int = 4096) -> list:
    """All fixed points of alpha on the circle.

    Transversal roots come from sign changes of alpha(y) - y on a uniform grid,
    refined by bisection. Tangential roots (where the displacement touches zero
    without changing sign) are found as zeros of its derivative at which the
    displacement itself is within ``tol`` of zero.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    ys = np.arange(grid + 1) / grid
    F = alpha.displacement(ys)
    dF = alpha.c * _shape_d1(ys)

    def disp(y):
        return float(alpha.displacement(y))

    def ddisp(y):
        return float(alpha.c * _shape_d1(np.asarray(y)))

    roots = []
    for i in range(grid):
        a, b = ys[i], ys[i + 1]
        fa, fb = F[i], F[i + 1]
        if fa == 0.0:
            roots.append(a)
        elif fa * fb < 0:
            roots.append(brentq(disp, a, b, xtol=1e-15, rtol=1e-15))
        if dF[i] * dF[i + 1] < 0:
            yc = brentq(ddisp, a, b, xtol=1e-15, rtol=1e-15)
            if abs(disp(yc)) <= tol:
                roots.append(yc)
    out = []
    for r in sorted(r % 1.0 for r in roots):
        if any(_circ_gap(r, o) < 1e-9 for o in out):
            continue
        out.append(r)
    return [CircleFixedPoint(float(r), float(alpha.derivative(r))) for r in out]


@dataclass(frozen=True, eq=False)
class SkewProductMap:
    """(q, y) -> (flow(q, 1 + sin 2 pi y), alpha(y))."""

    flow: SuspensionFlow
    circle: CircleMap

    @staticmethod
    def fiber_speed(y):
        return 1.0 + np.sin(TWO_PI * np.asarray(y, dtype=float))

    def apply(self, q, y):
        t = self.fiber_speed(y)
        return self.flow.flow(q, t), self.circle(y)

    def fiber_map(self, y: float) -> SuspensionTimeMap:
        """Restriction to the fiber over a fixed point y of the circle map."""
        return self.flow.time_map(float(self.fiber_speed(y)))


def cat_matrix() -> IntegerMatrix:
    return IntegerMatrix([[2, 1], [1, 1]])
