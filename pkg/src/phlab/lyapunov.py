"""Lyapunov spectra by QR re-orthonormalization, exponent bands and the Pesin-Ruelle margins."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .torus import PHConstants

WARMUP = 200
AMBIGUITY = 1e-3


class FrameOverflowError(FloatingPointError):
    """The tangent frame left the floating-point range between re-orthonormalizations."""


@dataclass(frozen=True)
class LyapunovSpectrum:
    exponents: tuple  # descending
    seed_point: tuple
    iterates: int
    gaps: tuple  # |estimate(N) - estimate(N/2)| per exponent

    @property
    def total(self) -> float:
        return float(sum(self.exponents))


@dataclass(frozen=True)
class ExponentBands:
    """Exponents below ``lower`` are stable, above ``upper`` unstable, the rest center."""

    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError("band boundaries must satisfy lower < upper")

    @classmethod
    def from_constants(cls, c: PHConstants, margin: float = 0.1) -> "ExponentBands":
        return cls(math.log(c.lambda_c_lo) - margin, math.log(c.lambda_c_hi) + margin)


@dataclass(frozen=True)
class ExponentGroups:
    stable: tuple
    center: tuple
    unstable: tuple
    ambiguous: tuple  # exponents within AMBIGUITY of a band boundary

    @property
    def center_term(self) -> float:
        """Sum of the positive center exponents."""
        return float(sum(max(v, 0.0) for v in self.center))


def lyapunov_spectrum(f, x, N: int = 10_000, reorth_every: int = 1,
                      warmup: int = WARMUP, seed: int = 0) -> LyapunovSpectrum:
    """Exponents along the orbit of x from a QR-reorthonormalized frame.

    The frame is first aligned for ``warmup`` steps without accumulating, which
    removes the O(1/N) bias from the initial frame.
    """
    if N < 1000:
        raise ValueError("N must be >= 1000")
    if reorth_every < 1:
        raise ValueError("reorth_every must be >= 1")
    x = np.asarray(x, dtype=float).copy()
    n = x.shape[-1]
    Q = np.linalg.qr(np.random.default_rng(seed).standard_normal((n, n)))[0]
    sums = np.zeros(n)
    half = None
    total = warmup + N
    forced = {warmup, warmup + N // 2, total}
    for k in range(1, total + 1):
        M = f.differential(x)
        x = f.apply(x)
        with np.errstate(over="ignore", invalid="ignore"):
            Q = M @ Q  # overflow is detected below and reported
        if k % reorth_every and k not in forced:
            continue
        if not np.all(np.isfinite(Q)):
            raise FrameOverflowError(
                f"tangent frame overflowed; use reorth_every < {reorth_every}"
            )
        Q, R = np.linalg.qr(Q)
        d = np.abs(np.diag(R))
        if np.any(d == 0) or not np.all(np.isfinite(d)):
            raise FrameOverflowError(
                f"tangent frame degenerated; use reorth_every < {reorth_every}"
            )
        if k > warmup:
            sums += np.log(d)
        if k == warmup + N // 2:
            half = sums / (N // 2)
    full = sums / N
    order = np.argsort(-full)
    gaps = np.abs(full - half)
    return LyapunovSpectrum(tuple(full[order]), tuple(np.asarray(x).tolist()), N,
                            tuple(gaps[order]))


def quasi_random_points(dim: int, count: int, seed: int = 0) -> np.ndarray:
    return qmc.Sobol(d=dim, scramble=True, seed=seed).random(count)


def classify_exponents(spec: LyapunovSpectrum, bands: ExponentBands) -> ExponentGroups:
    s, c, u, amb = [], [], [], []
    for v in spec.exponents:
        if v < bands.lower:
            s.append(v)
        elif v > bands.upper:
            u.append(v)
        else:
            c.append(v)
        if min(abs(v - bands.lower), abs(v - bands.upper)) < AMBIGUITY:
            amb.append(v)
    return ExponentGroups(tuple(s), tuple(c), tuple(u), tuple(amb))


def refined_pesin_ruelle_check(h_nu_hat: float, center_term: float, chi_u_hat: float) -> float:
    """center_term + chi_u - h_nu; nonnegative up to estimator error."""
    return center_term + chi_u_hat - h_nu_hat


def pesin_ruelle_check(h_nu_hat: float, spec: LyapunovSpectrum) -> float:
    """Sum of positive exponents minus h_nu."""
    return float(sum(max(v, 0.0) for v in spec.exponents)) - h_nu_hat
