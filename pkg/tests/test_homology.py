import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phlab.homology import (
    GrowthPreconditionError,
    HomologyClass,
    charpoly,
    check_eigen_relation,
    exterior_power,
    spectrum,
    topological_growth,
    unstable_homology_class,
)
from phlab.torus import IntegerMatrix, block_diag, cat_matrix

PHI2 = (3 + math.sqrt(5)) / 2


def minor_oracle(A, I, J):
    """Leibniz-formula determinant, independent of the implementation."""
    sub = [[A[i][j] for j in J] for i in I]
    k = len(I)
    total = 0
    for perm in itertools.permutations(range(k)):
        inv = sum(1 for a in range(k) for b in range(a + 1, k) if perm[a] > perm[b])
        term = (-1) ** inv
        for r, c in enumerate(perm):
            term *= sub[r][c]
        total += term
    return total


@st.composite
def unimodular(draw, n):
    """Products of elementary row operations and sign flips: exactly unimodular."""
    M = np.eye(n, dtype=np.int64)
    for _ in range(draw(st.integers(1, 6))):
        i, j = draw(st.integers(0, n - 1)), draw(st.integers(0, n - 1))
        if i == j:
            M[i] *= -1
        else:
            M[i] += draw(st.integers(-1, 1)) * M[j]
    return IntegerMatrix(M)


def test_exterior_power_examples():
    A = cat_matrix()
    assert np.array_equal(exterior_power(A, 1).matrix, A.entries)
    assert np.array_equal(exterior_power(np.eye(3, dtype=int), 2).matrix, np.eye(3))
    ph3 = [[2, 1, 0], [1, 1, 0], [0, 0, 1]]
    assert np.array_equal(exterior_power(ph3, 2).matrix, [[1, 0, 0], [0, 2, 1], [0, 1, 1]])


def test_exterior_power_degree_range():
    with pytest.raises(ValueError):
        exterior_power(cat_matrix(), 3)


@settings(max_examples=40, deadline=None)
@given(unimodular(4), st.integers(1, 4))
def test_minors_match_leibniz_oracle(A, k):
    h = exterior_power(A, k)
    a = A.entries.tolist()
    for r, I in enumerate(h.basis):
        for c, J in enumerate(h.basis):
            assert h.matrix[r, c] == minor_oracle(a, I, J)


@settings(max_examples=100, deadline=None)
@given(unimodular(4), unimodular(4), st.integers(1, 4))
def test_functoriality(A, B, k):
    lhs = exterior_power(A @ B, k).matrix
    rhs = exterior_power(A, k).matrix @ exterior_power(B, k).matrix
    assert np.array_equal(lhs, rhs)


@settings(max_examples=60, deadline=None)
@given(unimodular(4), st.integers(1, 4))
def test_exterior_power_is_unimodular(A, k):
    assert abs(round(np.linalg.det(exterior_power(A, k).matrix.astype(float)))) == 1


def test_charpoly_cat():
    assert charpoly(cat_matrix().entries) == [1, -3, 1]


def test_spectrum_examples():
    ev = spectrum(cat_matrix().entries).eigenvalues
    assert np.allclose(np.abs(ev), [PHI2, 1 / PHI2], atol=1e-9)
    ev = spectrum(np.array([[2, 1, 0], [1, 1, 0], [0, 0, 1]])).eigenvalues
    assert np.allclose(np.abs(ev), [PHI2, 1.0, 1 / PHI2], atol=1e-9)
    rep = spectrum(np.eye(3, dtype=np.int64))
    assert np.allclose(rep.eigenvalues, 1.0) and not rep.dominant_simple


@settings(max_examples=60, deadline=None)
@given(unimodular(4), st.integers(1, 4))
def test_spectrum_moduli_multiply_to_one(A, k):
    rep = spectrum(exterior_power(A, k))
    assert np.prod(np.abs(rep.eigenvalues)) == pytest.approx(1.0, rel=1e-6)
    mods = np.abs(rep.eigenvalues)
    assert np.all(np.diff(mods) <= 1e-9 * (1 + mods[:-1]))


@settings(max_examples=40, deadline=None)
@given(unimodular(3), st.integers(1, 3))
def test_spectrum_conjugation_invariance(P, k):
    A = IntegerMatrix([[2, 1, 0], [1, 1, 0], [0, 0, 1]])
    C = P @ A @ P.inverse()
    a = np.sort_complex(np.array(spectrum(exterior_power(A, k)).eigenvalues))
    c = np.sort_complex(np.array(spectrum(exterior_power(C, k)).eigenvalues))
    assert np.allclose(a, c, atol=1e-9)


def test_topological_growth_examples():
    lam, unique = topological_growth(cat_matrix(), 1)
    assert lam == pytest.approx(2.618034, abs=1e-6) and unique
    assert abs(lam - PHI2) < 1e-9
    lam, unique = topological_growth(block_diag(cat_matrix(), cat_matrix()), 2)
    assert lam == pytest.approx(PHI2 ** 2, abs=1e-9) and unique
    with pytest.raises(GrowthPreconditionError, match="unstable dimension"):
        topological_growth(IntegerMatrix(np.eye(2, dtype=int)), 1)


def test_stable_unstable_duality():
    A = cat_matrix()
    assert topological_growth(A, 1)[0] == pytest.approx(topological_growth(A.inverse(), 1)[0],
                                                         abs=1e-9)


def test_unstable_class_examples():
    v = unstable_homology_class(cat_matrix(), 1)
    assert np.allclose(v.coords, [0.850651, 0.525731], atol=1e-6)
    v = unstable_homology_class([[2, 1, 0], [1, 1, 0], [0, 0, 1]], 1)
    assert np.allclose(v.coords, [0.850651, 0.525731, 0.0], atol=1e-6)
    with pytest.raises(GrowthPreconditionError):
        unstable_homology_class(np.eye(2, dtype=int), 1)


def test_eigen_relation_examples():
    A = cat_matrix()
    h = exterior_power(A, 1)
    v = unstable_homology_class(A, 1)
    assert check_eigen_relation(h, v, PHI2) < 1e-10
    assert check_eigen_relation(h, v, 1.0) == pytest.approx(PHI2 - 1, abs=1e-9)
    eye = exterior_power(np.eye(2, dtype=int), 1)
    assert check_eigen_relation(eye, HomologyClass(np.array([0.6, 0.8]), 1), 1.0) == 0.0


def test_homology_class_requires_unit_norm():
    with pytest.raises(ValueError):
        HomologyClass(np.array([1.0, 1.0]), 1)
