import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phlab.entropy import (
    GridPartition,
    SampleSpec,
    SaturationError,
    code_orbits,
    conditional_entropies,
    count_separated,
    decoupled_factors,
    estimate_measure_entropy,
    estimate_topological_entropy,
    estimate_topological_entropy_by_factors,
    exact_max_separated,
    flow_fit_start,
    measure_entropy_by_factors,
    orbit_segments,
    restrict_to_block,
    separated_table,
)
from phlab.torus import (
    IntegerMatrix,
    Rotation,
    SuspensionFlow,
    ToralDiffeo,
    block_diag,
    cat_matrix,
    torus_sup_distance,
)

from conftest import LN_PHI2, ph3_map

IDENTITY2 = ToralDiffeo(IntegerMatrix(np.eye(2, dtype=int)))


def greedy_oracle(f, x, n, eps):
    """Plain O(N^2) greedy admission in sample order with the map's own metric."""
    orb = [x]
    for _ in range(n):
        orb.append(f.apply(orb[-1]))
    dist = getattr(getattr(f, "flow", None), "distance", None) or torus_sup_distance
    kept = []
    for i in range(len(x)):
        ok = True
        for j in kept:
            if max(float(dist(o[i], o[j])) for o in orb) < eps:
                ok = False
                break
        if ok:
            kept.append(i)
    return len(kept)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(0, 3), st.floats(0.06, 0.3))
def test_count_matches_bruteforce_cat(seed, n, eps):
    x = np.random.default_rng(seed).random((150, 2))
    cat = ToralDiffeo(cat_matrix())
    assert count_separated(cat, n, eps, x) == greedy_oracle(cat, x, n, eps)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31), st.integers(0, 3), st.floats(0.06, 0.3))
def test_count_matches_bruteforce_perturbed(seed, n, eps):
    x = np.random.default_rng(seed).random((120, 3))
    f = ph3_map(0.02)
    assert count_separated(f, n, eps, x) == greedy_oracle(f, x, n, eps)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31), st.integers(0, 3), st.floats(0.05, 0.1),
       st.sampled_from([0.5, 0.9085, 1.0, 2.0]))
def test_count_matches_bruteforce_suspension(seed, n, eps, t):
    x = np.random.default_rng(seed).random((120, 3))
    g = SuspensionFlow(cat_matrix()).time_map(t)
    assert count_separated(g, n, eps, x) == greedy_oracle(g, x, n, eps)


def test_count_rejects_nonpositive_eps(cat):
    with pytest.raises(ValueError):
        count_separated(cat, 1, 0.0, np.zeros((3, 2)))


def test_identity_count_independent_of_n():
    x = SampleSpec((64, 64), 0).points()
    counts = {count_separated(IDENTITY2, n, 0.1, x) for n in range(4)}
    assert len(counts) == 1


def test_rotation_count_bounded():
    rot = Rotation((0.1234, 0.5678))
    x = np.random.default_rng(1).random((2000, 1))
    rot1 = Rotation((0.1234,))
    for n in (0, 3, 6):
        assert count_separated(rot1, n, 0.1, x) <= math.ceil(1 / 0.1)
    assert rot.dim == 2


def test_cat_increments_near_log_lambda(cat):
    t = separated_table(cat, [0.1], 6, SampleSpec((512, 512), 0))
    c = t.counts(0.1)
    inc = np.diff(np.log(c))
    limit = t.sample_size / 128
    pre = [inc[n - 1] for n in range(2, len(c)) if c[n] <= limit]
    assert pre and all(abs(v - LN_PHI2) < 0.1 for v in pre)


def test_table_monotone(cat):
    t = separated_table(cat, [0.2, 0.1, 0.05], 5, SampleSpec((128, 128), 3))
    assert t.is_monotone()
    assert t.mode == "lifted"


def test_ladder_must_decrease(cat):
    with pytest.raises(ValueError):
        separated_table(cat, [0.1, 0.2], 3, SampleSpec((64, 64)))


def test_greedy_vs_exact(cat):
    rng = np.random.default_rng(0)
    grid = SampleSpec((64, 64), 0).points()
    for n in range(0, 5):
        x = grid[rng.choice(len(grid), 40, replace=False)]
        g = count_separated(cat, n, 0.15, x)
        e = exact_max_separated(cat, n, 0.15, x)
        assert e >= g >= 0.5 * e


def test_exact_search_limit(cat):
    with pytest.raises(ValueError):
        exact_max_separated(cat, 1, 0.1, np.zeros((65, 2)))


def test_cat_entropy_estimate(cat):
    e = estimate_topological_entropy(cat, [0.2, 0.1, 0.05], 8, SampleSpec((512, 512), 0))
    assert 0.86 <= e.h_hat <= 1.06
    assert e.h_hat >= 0
    assert e.table.is_monotone()


def test_inverse_symmetry(cat):
    spec = SampleSpec((384, 384), 0)
    h = estimate_topological_entropy(cat, [0.2, 0.1], 7, spec).h_hat
    hi = estimate_topological_entropy(cat.inverse(), [0.2, 0.1], 7, spec).h_hat
    assert abs(h - hi) < 0.1


def test_identity_entropy_zero():
    e = estimate_topological_entropy(IDENTITY2, [0.2, 0.1], 6, SampleSpec((128, 128), 0))
    assert e.h_hat <= 0.02


def test_all_saturated_error(cat):
    with pytest.raises(SaturationError, match="all eps saturated"):
        estimate_topological_entropy(cat, [0.05, 0.01], 4, SampleSpec((64, 64), 0))
    with pytest.raises(SaturationError, match="all eps saturated"):
        estimate_topological_entropy(cat, [0.1], 6, SampleSpec((32, 32), 0))


def test_flow_fit_start():
    assert flow_fit_start(1.0) == 2
    assert flow_fit_start(2.0) == 1
    assert flow_fit_start(0.5) == 4
    with pytest.raises(ValueError):
        flow_fit_start(0.0)


def test_suspension_scaling(flow):
    spec = SampleSpec((256, 256, 16), 0)
    h = {}
    # a desk-sized sample; the time-2 map needs the larger sample of the lab catalog
    for t in (0.5, 1.0):
        fs = flow_fit_start(t)
        h[t] = estimate_topological_entropy(flow.time_map(t), [0.1], max(fs + 2, int(4.5 / t)),
                                            spec, fs).h_hat
    assert h[1.0] / h[0.5] == pytest.approx(2.0, abs=0.2)


def test_orbit_segments_shape(cat):
    orb = orbit_segments(cat, np.array([[0.5, 0.5]]), 2)
    assert orb.shape == (1, 3, 2)
    assert np.allclose(orb[0, 1], [0.5, 0.0])


def test_grid_partition_tiles():
    p = GridPartition((4, 3))
    x = np.random.default_rng(0).random((10000, 2))
    ids = p.cell(x)
    assert ids.min() >= 0 and ids.max() < p.n_cells
    edges = np.array([[0.0, 0.0], [0.25, 1 / 3], [0.999999, 0.999999]])
    assert len(set(p.cell(edges).tolist())) == 3


def test_identity_measure_entropy_zero():
    e = estimate_measure_entropy(IDENTITY2, GridPartition((2, 2)), orbit_length=100_000)
    assert e.h == 0.0


def test_cat_measure_entropy(cat):
    e = estimate_measure_entropy(cat, GridPartition((2, 2)), orbit_length=4_000_000)
    assert e.h == pytest.approx(LN_PHI2, abs=0.1)
    assert e.plateau_m is not None and e.plateau_m >= 2
    assert not e.biased_low


def test_measure_entropy_flags_undersampling(cat):
    # about four samples per length-2 context: most contexts are rare
    codes = code_orbits(cat, GridPartition((16, 16)), 3_000, chains=16)
    e = conditional_entropies(codes, 256, 6, tol=0.5)
    assert e.rare_context_fraction > 0.01
    assert e.biased_low


def test_ph3_measure_entropy():
    e = estimate_measure_entropy(ph3_map(0.0), GridPartition((2, 2, 1)), orbit_length=4_000_000)
    assert e.h == pytest.approx(LN_PHI2, abs=0.1)


def test_decoupled_factors():
    t4 = ToralDiffeo(block_diag(cat_matrix(), cat_matrix()))
    assert decoupled_factors(t4) == [(0, 1), (2, 3)]
    assert decoupled_factors(ph3_map(0.0)) == [(0, 1), (2,)]
    assert decoupled_factors(ph3_map(0.02)) == [(0, 1, 2)]
    g = restrict_to_block(t4, (2, 3))
    assert np.array_equal(g.linear.entries, cat_matrix().entries)


def test_factor_entropy_sums():
    t4 = ToralDiffeo(block_diag(cat_matrix(), cat_matrix()))
    fe = estimate_topological_entropy_by_factors(t4, [0.2, 0.1], 6, 256)
    assert fe.h_hat == pytest.approx(sum(e.h_hat for e in fe.factors))
    assert fe.h_hat == pytest.approx(2 * LN_PHI2, abs=0.2)
    me = measure_entropy_by_factors(t4, 2, orbit_length=1_000_000)
    assert me.h == pytest.approx(2 * LN_PHI2, abs=0.2)
