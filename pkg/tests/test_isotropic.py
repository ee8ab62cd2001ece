import numpy as np
import pytest
from scipy.stats import special_ortho_group

from src.john_forge.body import UnitBall, VPolytope, transform
from src.john_forge.errors import AllZeroWeights, FullSphereContacts, NonpositiveLambda
from src.john_forge.isotropic import (
    IsotropicMeasure,
    PipelineConfig,
    decompose,
    extract_weights,
    normalize_to_lambda,
    verify_john,
)
from src.john_forge.loewner import ContactSet
from src.john_forge.minimize import minimize_Ic
from src.john_forge.objective import DiscreteMeasureProblem, FVariant, ObjectiveF, solvability_check
from src.john_forge.shapes import cross_polytope, cross_polytope_vertices, regular_polygon, regular_simplex
from src.john_forge.symspace import SymPair

# -------- helpers --------

ALL_F = [ObjectiveF(v) for v in FVariant]

HEPTAGON = np.array([[np.cos(t), np.sin(t)] for t in (0.0, 0.7, 1.9, 2.6, 3.5, 4.4, 5.5)])


def triangle():
    t = 2 * np.pi * np.arange(3) / 3
    return np.column_stack([np.cos(t), np.sin(t)])


def weights_at_minimum(points, F=ObjectiveF()):
    prob = DiscreteMeasureProblem(ContactSet(points), F)
    res = minimize_Ic(prob)
    assert res.converged
    return extract_weights(prob, res.minimizer)


def john_residuals(points, c):
    """Direct matrix sums: |sum c_i xi_i xi_i^T - lam I|_F and |sum c_i xi_i|."""
    n = points.shape[1]
    lam = c.sum() / n
    T = sum(ci * np.outer(p, p) for ci, p in zip(c, points))
    return np.linalg.norm(T - lam * np.eye(n)), np.linalg.norm(c @ points)


# -------- weights --------

def test_cross_polytope_weights():
    meas = weights_at_minimum(cross_polytope_vertices(2))
    assert np.allclose(meas.weights, 1.0)
    assert meas.lam == pytest.approx(2.0)
    assert meas.residual_iso <= 1e-12
    assert meas.residual_center <= 1e-12


def test_triangle_weights():
    meas = weights_at_minimum(triangle())
    assert np.allclose(meas.weights, 1.0)
    assert meas.lam == pytest.approx(1.5)
    assert verify_john(meas).passed


def test_residuals_match_direct_sums():
    meas = weights_at_minimum(HEPTAGON, ObjectiveF(FVariant.PAPER_CONV))
    iso, center = john_residuals(meas.points, meas.weights)
    assert meas.residual_iso == pytest.approx(iso, abs=1e-15)
    assert meas.residual_center == pytest.approx(center, abs=1e-15)


@pytest.mark.parametrize("F", ALL_F)
def test_any_admissible_F_gives_a_john_measure(F):
    meas = weights_at_minimum(HEPTAGON, F)
    report = verify_john(meas)
    assert report.passed, report.to_json()
    assert np.all(meas.weights > 0)


def test_weights_depend_on_F_but_all_verify():
    a = weights_at_minimum(HEPTAGON, ObjectiveF(FVariant.EXP))
    b = weights_at_minimum(HEPTAGON, ObjectiveF(FVariant.SHIFTED_SQUARE))
    na, nb = normalize_to_lambda(a), normalize_to_lambda(b)
    assert verify_john(na).passed and verify_john(nb).passed
    assert na.total == pytest.approx(2.0) and nb.total == pytest.approx(2.0)


def test_all_zero_weights():
    points = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]])
    prob = DiscreteMeasureProblem(ContactSet(points), ObjectiveF(FVariant.SHIFTED_SQUARE))
    far = 100.0 * solvability_check(prob.contacts).witness
    with pytest.raises(AllZeroWeights):
        extract_weights(prob, far)


# -------- verify / normalize --------

def test_perturbed_weights_fail():
    P = cross_polytope_vertices(2)
    c = np.array([1.1, 1.0, 1.0, 1.0])
    meas = IsotropicMeasure.from_weights(P, c)
    assert meas.lam == pytest.approx(2.05)
    iso, center = john_residuals(P, c)
    assert meas.residual_iso == pytest.approx(iso) == pytest.approx(0.05 * np.sqrt(2))
    assert meas.residual_center == pytest.approx(center) == pytest.approx(0.1)
    report = verify_john(meas)
    assert not report.passed
    assert report.to_json()["pass"] is False


def test_negative_weight_fails():
    meas = IsotropicMeasure.from_weights(cross_polytope_vertices(2), [1.0, 1.0, 1.0, 1.0])
    assert verify_john(meas).passed
    shifted = IsotropicMeasure(meas.points, np.array([1.0, 1.0, 1.0, -1e-6]), 2.0, 0.0, 0.0)
    assert not verify_john(shifted).passed


def test_normalize_to_lambda():
    meas = normalize_to_lambda(weights_at_minimum(cross_polytope_vertices(2)))
    assert meas.lam == pytest.approx(1.0)
    assert np.allclose(meas.weights, 0.5)
    twice = normalize_to_lambda(meas, 3.0)
    assert twice.total == pytest.approx(6.0)


def test_normalize_rejects_bad_lambda():
    zero = IsotropicMeasure.from_weights(cross_polytope_vertices(2), np.zeros(4))
    with pytest.raises(NonpositiveLambda):
        normalize_to_lambda(zero)
    one = IsotropicMeasure.from_weights(cross_polytope_vertices(2), np.ones(4))
    with pytest.raises(NonpositiveLambda):
        normalize_to_lambda(one, 0.0)


def test_from_weights_length_mismatch():
    with pytest.raises(ValueError):
        IsotropicMeasure.from_weights(cross_polytope_vertices(2), [1.0, 1.0])


def test_tiny_weights_are_clamped_in_json():
    meas = IsotropicMeasure.from_weights(triangle(), [1.0, 1.0, 1e-16])
    assert meas.to_json()["weights"][2] == 0.0


# -------- pipeline --------

@pytest.mark.parametrize("F", ALL_F)
@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_simplex_decomposition(n, F):
    d = decompose(regular_simplex(n), PipelineConfig(F=F))
    assert d.report.passed
    assert d.measure.residual_iso / d.measure.lam <= 1e-8
    assert d.measure.residual_center / d.measure.total <= 1e-8
    norm = normalize_to_lambda(d.measure)
    assert np.allclose(norm.weights, n / (n + 1), atol=1e-6)
    # the simplex contacts leave flat directions, so the minimizer is not unique
    assert d.unique is False


@pytest.mark.parametrize("F", ALL_F)
@pytest.mark.parametrize("n", [2, 3])
def test_cross_polytope_decomposition(n, F):
    d = decompose(cross_polytope(n), PipelineConfig(F=F))
    assert d.report.passed
    assert d.measure.residual_iso / d.measure.lam <= 1e-8
    assert d.measure.residual_center / d.measure.total <= 1e-8
    assert np.allclose(normalize_to_lambda(d.measure).weights, 0.5)


@pytest.mark.parametrize("F", ALL_F)
def test_pentagon_pipeline(F):
    d = decompose(regular_polygon(5, radius=2.0, phase=0.4), PipelineConfig(F=F))
    assert np.allclose(d.A, 0.5 * np.eye(2), atol=1e-6)
    assert d.contacts.m == 5
    assert d.solvability.interior
    assert d.report.passed
    assert d.unique is True


def test_square_pipeline():
    d = decompose(VPolytope(np.array([[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]])))
    assert d.report.passed
    assert np.allclose(d.measure.weights, d.measure.weights[0])


def test_orthogonal_equivariance():
    K = transform(regular_polygon(6), np.diag([1.5, 0.8]))
    R = special_ortho_group.rvs(2, random_state=3)
    a = decompose(K)
    b = decompose(transform(K, R))
    assert a.report.passed and b.report.passed
    assert np.allclose(b.A, R @ a.A @ R.T, atol=1e-8)
    assert np.allclose(np.sort(a.measure.weights), np.sort(b.measure.weights), atol=1e-6)


def test_pipeline_config_validation():
    with pytest.raises(ValueError):
        PipelineConfig(john_tol=0.0)


def test_extract_weights_uses_the_given_pair():
    prob = DiscreteMeasureProblem(ContactSet(triangle()))
    meas = extract_weights(prob, SymPair.zeros(2))
    assert np.allclose(meas.weights, 1.0)


def test_ball_has_no_finite_decomposition():
    with pytest.raises(FullSphereContacts):
        decompose(UnitBall(2))
