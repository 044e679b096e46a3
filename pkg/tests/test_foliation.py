import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phlab.forms import DifferentialForm, TrigPoly, const, dx, exterior_derivative, function_form
from phlab.foliation import (
    PolyPatch,
    UnstableDirectionError,
    VertexBudgetError,
    boundary_term,
    closedness_defect,
    current_class,
    defect_decay,
    estimate_volume_growth,
    evaluate_current,
    integrate_form,
    iterate_refine,
    jacobian_gap,
    patch_volume,
    refine,
    seed_unstable_disk,
    unstable_frames,
)
from phlab.torus import IntegerMatrix, Rotation, ToralDiffeo, block_diag, cat_matrix

from conftest import LN_PHI2, ph3_map

PHI2 = math.exp(LN_PHI2)
U_CAT = np.array([0.85065080835204, 0.52573111211913])


def segment(a, b, m=10):
    t = np.linspace(0, 1, m + 1)[:, None]
    lift = np.asarray(a) + t * (np.asarray(b) - np.asarray(a))
    fl = np.floor(lift)
    return PolyPatch(1, lift - fl, fl.astype(np.int64))


def unit_square_mesh():
    lift = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    fl = np.floor(lift)
    return PolyPatch(2, lift - fl, fl.astype(np.int64), np.array([[0, 1, 2], [0, 2, 3]]))


def angle(u, v):
    c = abs(float(np.dot(u, v))) / (np.linalg.norm(u) * np.linalg.norm(v))
    return math.acos(min(1.0, c))


def test_seeded_direction_cat(cat):
    U = unstable_frames(cat, np.array([[0.3, 0.6]]), 1)[0][:, 0]
    assert angle(U, U_CAT) < 1e-8


def test_seeded_direction_perturbed(cat_perturbed):
    U = unstable_frames(cat_perturbed, np.array([[0.3, 0.6]]), 1)[0][:, 0]
    assert angle(U, U_CAT) < 0.05


def test_unstable_frames_fail_without_expansion():
    with pytest.raises(UnstableDirectionError):
        unstable_frames(Rotation((0.1, 0.2)), np.array([[0.3, 0.6]]), 1)


def test_seed_length(cat):
    p = seed_unstable_disk(cat, [0.3, 0.6], 0.1, 1)
    assert patch_volume(p) == pytest.approx(0.2, abs=1e-6)


def test_seed_rejects_bad_arguments(cat):
    with pytest.raises(ValueError):
        seed_unstable_disk(cat, [0.3, 0.6], 0.3, 1)
    with pytest.raises(ValueError):
        seed_unstable_disk(cat, [0.3, 0.6], 0.1, 3)


def test_iterate_stretches_by_eigenvalue(cat):
    p = seed_unstable_disk(cat, [0.3, 0.6], 0.05, 1)
    L = patch_volume(p)
    q = iterate_refine(cat, p)
    assert patch_volume(q) == pytest.approx(PHI2 * L, abs=1e-9)


def test_identity_keeps_volume():
    eye = ToralDiffeo(IntegerMatrix(np.eye(2, dtype=int)))
    p = segment([0.1, 0.1], [0.5, 0.9])
    assert patch_volume(iterate_refine(eye, p)) == pytest.approx(patch_volume(p), abs=1e-12)


@pytest.mark.parametrize("max_edge", [0.02, 0.05])
def test_edge_length_postcondition(cat, max_edge):
    p = seed_unstable_disk(cat, [0.2, 0.7], 0.05, 1, max_edge=max_edge)
    for _ in range(5):
        p = iterate_refine(cat, p, max_edge)
        d = np.diff(p.lifted(), axis=0)
        assert np.all(np.linalg.norm(d, axis=1) <= max_edge + 1e-12)


def test_mesh_edge_length_postcondition():
    t4 = ToralDiffeo(block_diag(cat_matrix(), cat_matrix()))
    p = seed_unstable_disk(t4, [0.1, 0.2, 0.3, 0.4], 0.03, 2, max_edge=0.05)
    p = iterate_refine(t4, p, 0.05)
    e = p.edges()
    d = p.lifted()[e[:, 1]] - p.lifted()[e[:, 0]]
    assert np.all(np.linalg.norm(d, axis=1) <= 0.05 + 1e-12)


def test_budget_error(cat):
    p = seed_unstable_disk(cat, [0.3, 0.6], 0.05, 1)
    with pytest.raises(VertexBudgetError, match="budget"):
        for _ in range(5):
            p = iterate_refine(cat, p, budget=50)


def test_patch_volume_examples():
    assert patch_volume(segment([0, 0], [0.3, 0])) == pytest.approx(0.3)
    sq = unit_square_mesh()
    assert patch_volume(sq) == pytest.approx(1.0)
    assert patch_volume(refine(sq, 0.1)) == pytest.approx(1.0, abs=1e-12)
    s = segment([0.1, 0.9], [0.8, 1.7], 3)
    assert patch_volume(refine(s, 0.01)) == pytest.approx(patch_volume(s), abs=1e-12)


def test_volume_growth_cat(cat):
    g = estimate_volume_growth(cat, [0.3, 0.6], 0.05, 1, 10)
    assert g.slope == pytest.approx(LN_PHI2, abs=0.01)
    assert g.r2 > 0.9999
    assert g.n_range == (5, 10)


def test_volume_growth_identity():
    eye = ToralDiffeo(IntegerMatrix(np.eye(2, dtype=int)), )
    # the identity has no unstable direction; grow a fixed straight segment directly
    p = segment([0.1, 0.1], [0.3, 0.2])
    logs = [math.log(patch_volume(p))]
    for _ in range(6):
        p = iterate_refine(eye, p)
        logs.append(math.log(patch_volume(p)))
    assert abs(logs[-1] - logs[0]) < 1e-6


def test_volume_growth_requires_n_max(cat):
    with pytest.raises(ValueError):
        estimate_volume_growth(cat, [0.3, 0.6], 0.05, 1, 5)


def test_volume_growth_ph3_independent_of_seed_and_radius():
    f = ph3_map(0.0)
    rng = np.random.default_rng(0)
    slopes = [estimate_volume_growth(f, rng.random(3), r, 1, 10).slope
              for _ in range(5) for r in (0.05, 0.1)]
    assert all(abs(s - LN_PHI2) < 0.01 for s in slopes)
    assert max(slopes) - min(slopes) < 0.02


def test_current_of_dx_is_unit_tangent(cat):
    p = seed_unstable_disk(cat, [0.3, 0.6], 0.05, 1)
    for _ in range(10):
        p = iterate_refine(cat, p)
    assert evaluate_current(p, dx(0)).value == pytest.approx(0.850651, abs=1e-3)
    cls = current_class(p)
    assert np.allclose(cls / np.linalg.norm(cls), U_CAT, atol=1e-3)


def test_integrate_exact_on_square():
    sq = unit_square_mesh()
    assert integrate_form(sq, dx(0, 1)) == pytest.approx(1.0)
    # sin(2 pi x) integrates to zero over a period
    w = dx(0, 1, coefficient=TrigPoly(((1.0, (1, 0), "sin"),)))
    assert abs(integrate_form(refine(sq, 0.05), w)) < 1e-12


def test_integrate_degree_mismatch():
    with pytest.raises(ValueError):
        integrate_form(unit_square_mesh(), dx(0))


forms_1d = st.lists(
    st.tuples(st.floats(-2, 2), st.integers(-2, 2), st.integers(-2, 2),
              st.sampled_from(["sin", "cos"]), st.integers(0, 1)),
    min_size=1, max_size=4,
).map(lambda ts: DifferentialForm(1, tuple(
    (TrigPoly(((c, (a, b), kind),)), (i,)) for c, a, b, kind, i in ts)))


@settings(max_examples=40, deadline=None)
@given(forms_1d, forms_1d)
def test_current_linearity_and_bound(w1, w2):
    p = segment([0.1, 0.2], [0.9, 1.7], 40)
    v1 = evaluate_current(p, w1).value
    v2 = evaluate_current(p, w2).value
    assert evaluate_current(p, w1 + w2).value == pytest.approx(v1 + v2, abs=1e-12)
    assert abs(v1) <= w1.sup_norm() + 1e-12


def test_stokes_on_curve():
    # integral of df over a curve equals f(end) - f(start)
    f0 = TrigPoly(((0.7, (1, 2), "sin"), (0.3, (0, 1), "cos")))
    p = refine(segment([0.1, 0.2], [0.6, 0.45], 2), 0.005)
    w = exterior_derivative(function_form(f0), 2)
    expect = float(f0(p.points[-1]) - f0(p.points[0]))
    assert integrate_form(p, w) == pytest.approx(expect, abs=1e-8)
    assert boundary_term(p, function_form(f0)) == pytest.approx(expect, abs=1e-12)


def test_closedness_defect_examples(cat):
    alpha = function_form(TrigPoly(((1 / (2 * math.pi), (1, 0), "sin"),)))
    assert abs(closedness_defect(cat, [0.3, 0.6], 0.05, 8, alpha)) < 1e-2
    assert closedness_defect(cat, [0.3, 0.6], 0.05, 8, function_form(const(2.0))) == 0.0
    dec = defect_decay(cat, [0.3, 0.6], 0.05, alpha, ns=range(2, 11))
    assert dec.rho < 0.5


def test_jacobian_examples(cat):
    assert jacobian_gap(cat, 1, 2000).min_ratio == pytest.approx(PHI2, abs=1e-6)
    t4 = ToralDiffeo(block_diag(cat_matrix(), cat_matrix()))
    assert jacobian_gap(t4, 2, 2000).min_ratio == pytest.approx(PHI2, abs=1e-6)


def test_jacobian_identity_fails_criterion():
    eye = ToralDiffeo(IntegerMatrix(np.eye(2, dtype=int)))
    g = jacobian_gap(eye, 1, 200)
    assert g.min_ratio == pytest.approx(1.0) and not g.holds
