"""Differential forms on T^n with trigonometric-polynomial coefficients."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class TrigPoly:
    """constant + sum c * trig(2 pi <k, x>) as a scalar function on the torus.

    ``terms`` holds (coefficient, frequency tuple, 'sin' | 'cos') triples.
    """

    terms: tuple = ()
    constant: float = 0.0

    def __post_init__(self):
        clean = []
        for c, k, kind in self.terms:
            if kind not in ("sin", "cos"):
                raise ValueError(f"unknown trig kind {kind!r}")
            clean.append((float(c), tuple(int(v) for v in k), kind))
        object.__setattr__(self, "terms", tuple(clean))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape[:-1], self.constant, dtype=float)
        for c, k, kind in self.terms:
            ph = TWO_PI * (x @ np.asarray(k, dtype=float))
            out = out + c * (np.sin(ph) if kind == "sin" else np.cos(ph))
        return out

    def partial(self, i: int) -> "TrigPoly":
        """Exact partial derivative along coordinate i."""
        out = []
        for c, k, kind in self.terms:
            f = c * TWO_PI * k[i]
            if f == 0.0:
                continue
            out.append((f, k, "cos") if kind == "sin" else (-f, k, "sin"))
        return TrigPoly(tuple(out))

    def sup_bound(self) -> float:
        return abs(self.constant) + sum(abs(c) for c, _, _ in self.terms)

    def __add__(self, other: "TrigPoly") -> "TrigPoly":
        return TrigPoly(self.terms + other.terms, self.constant + other.constant)

    def __neg__(self) -> "TrigPoly":
        return TrigPoly(tuple((-c, k, kind) for c, k, kind in self.terms), -self.constant)

    def scale(self, a: float) -> "TrigPoly":
        return TrigPoly(tuple((a * c, k, kind) for c, k, kind in self.terms), a * self.constant)


def const(c: float) -> TrigPoly:
    return TrigPoly((), float(c))


@dataclass(frozen=True)
class DifferentialForm:
    """sum_I f_I dx_I with I strictly increasing multi-indices of length ``degree``."""

    degree: int
    terms: tuple  # (TrigPoly, multi-index) pairs

    def __post_init__(self):
        clean = []
        for f, idx in self.terms:
            idx = tuple(int(i) for i in idx)
            if len(idx) != self.degree:
                raise ValueError(f"multi-index {idx} does not have length {self.degree}")
            if any(a >= b for a, b in zip(idx, idx[1:])):
                raise ValueError(f"multi-index {idx} is not strictly increasing")
            clean.append((f, idx))
        object.__setattr__(self, "terms", tuple(clean))

    def coefficient_arrays(self, x: np.ndarray, n: int) -> dict:
        """{multi-index: coefficient values at x}, merged over repeated indices."""
        out = {}
        for f, idx in self.terms:
            if idx and max(idx) >= n:
                raise ValueError(f"multi-index {idx} out of range for dimension {n}")
            out[idx] = out.get(idx, 0.0) + f(x)
        return out

    def sup_norm(self) -> float:
        """Bound on |omega(unit simple k-vector)| over the torus."""
        return sum(f.sup_bound() for f, _ in self.terms)

    def __add__(self, other: "DifferentialForm") -> "DifferentialForm":
        if other.degree != self.degree:
            raise ValueError("cannot add forms of different degree")
        return DifferentialForm(self.degree, self.terms + other.terms)

    def scale(self, a: float) -> "DifferentialForm":
        return DifferentialForm(self.degree, tuple((f.scale(a), i) for f, i in self.terms))


def dx(*idx: int, coefficient: TrigPoly | None = None) -> DifferentialForm:
    f = coefficient if coefficient is not None else const(1.0)
    return DifferentialForm(len(idx), ((f, tuple(idx)),))


def function_form(f: TrigPoly) -> DifferentialForm:
    return DifferentialForm(0, ((f, ()),))


def exterior_derivative(alpha: DifferentialForm, n: int) -> DifferentialForm:
    """d alpha for forms of degree 0 or 1 on T^n."""
    if alpha.degree == 0:
        terms = []
        for f, _ in alpha.terms:
            for i in range(n):
                g = f.partial(i)
                if g.terms:
                    terms.append((g, (i,)))
        return DifferentialForm(1, tuple(terms))
    if alpha.degree == 1:
        terms = []
        for f, (j,) in alpha.terms:
            for i in range(n):
                if i == j:
                    continue
                g = f.partial(i)
                if not g.terms:
                    continue
                # d(f dx_j) = sum_i d_i f dx_i ^ dx_j
                if i < j:
                    terms.append((g, (i, j)))
                else:
                    terms.append((-g, (j, i)))
        return DifferentialForm(2, tuple(terms))
    raise NotImplementedError("exterior derivative only for degrees 0 and 1")


def basis_forms(n: int, k: int) -> list:
    return [dx(*I) for I in combinations(range(n), k)]
