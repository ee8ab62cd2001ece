import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import special_ortho_group

from src.john_forge.body import UnitBall, VPolytope, transform
from src.john_forge.errors import SingularDeformation
from src.john_forge.flow import (
    FlowConfig,
    I1_sphere,
    Ir_eval,
    Lr_eval,
    check_profiles,
    coercivity_profile,
    derivative_check,
    minimize_I1,
    minimize_Lr,
    profile_f,
    profile_g,
    rescale,
    sl_matrix,
    stationarity_residual,
    weak_convergence_check,
)
from src.john_forge.loewner import to_loewner
from src.john_forge.objective import FVariant, ObjectiveF
from src.john_forge.quadrature import QuadratureConfig
from src.john_forge.shapes import cross_polytope
from src.john_forge.symspace import SymMatrix, SymPair

# -------- helpers --------

CONV = ObjectiveF(FVariant.PAPER_CONV)
BALL = UnitBall(2)
DIAMOND = cross_polytope(2)
QUAD = QuadratureConfig(n_ang=128)
HEPTAGON_RS = [0.9, 0.95, 0.99]


def ball_Lr_oracle(r, A, n=2):
    """1/(1-r) int f_r(|A x|) g_r(|x|) dx on the unit ball, nested scipy quad in polar coordinates."""
    fr = rescale(profile_f, r)
    gr = rescale(profile_g, r)
    if n == 3:
        # A = I: radial only
        val, _ = quad(lambda p: float(fr(p) * gr(p)) * 4 * np.pi * p * p, r, 2 - r, epsabs=1e-13)
        return val / (1 - r)

    def radial(theta):
        a = np.linalg.norm(A @ np.array([np.cos(theta), np.sin(theta)]))
        root = r / a
        if root >= 2 - r:
            return 0.0
        val, _ = quad(lambda p: float(fr(p * a) * gr(p)) * p, root, 2 - r,
                      points=[r] if root < r else None, epsabs=1e-13, epsrel=1e-12)
        return val

    val, _ = quad(radial, 0.0, 2 * np.pi, limit=200, epsabs=1e-12, epsrel=1e-11)
    return val / (1 - r)


def I1_oracle(a):
    """int_0^2pi F(a cos 2 theta) d theta."""
    kinks = [t for t in np.linspace(0, 2 * np.pi, 9)[1:-1]]
    val, _ = quad(lambda t: float(CONV.eval(a * np.cos(2 * t))), 0.0, 2 * np.pi, points=kinks, limit=400,
                  epsabs=1e-13, epsrel=1e-13)
    return val


# -------- profiles --------

def test_profiles_satisfy_their_hypotheses():
    assert check_profiles().ok


def test_profile_values():
    assert profile_f(-1.0) == 0.0 and profile_f(1.0) == 2.0
    assert profile_g(-2.0) == 1.0 and profile_g(0.0) == 0.5 and profile_g(1.0) == 0.0


def test_rescaled_profiles():
    r = 0.9
    assert rescale(profile_f, r)(r) == pytest.approx(0.0)
    assert rescale(profile_f, r)(1.0) == pytest.approx(1.0)
    assert rescale(profile_g, r)(r) == pytest.approx(1.0)
    assert rescale(profile_g, r)(2 - r) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("r", [0.5, 1.0, 0.3])
def test_r_range(r):
    with pytest.raises(ValueError):
        rescale(profile_f, r)
    with pytest.raises(ValueError):
        Lr_eval(BALL, r, np.eye(2))


# -------- L_r and I_r --------

@pytest.mark.parametrize("r", [0.6, 0.9, 0.99])
def test_ball_Lr_at_identity_is_four_thirds_pi(r):
    est = Lr_eval(BALL, r, np.eye(2), quad=QUAD)
    assert float(est) == pytest.approx(4 * np.pi / 3, rel=1e-10)
    assert float(est) == pytest.approx(ball_Lr_oracle(r, np.eye(2)), rel=1e-9)


def test_ball_Lr_against_polar_oracle():
    r = 0.9
    A = np.array([[1.25, 0.2], [0.2, 0.85]])
    v = np.zeros(2)
    got = float(Lr_eval(BALL, r, A, v, QuadratureConfig(tol=1e-9)))
    assert got == pytest.approx(ball_Lr_oracle(r, A), rel=1e-6)


def test_ball_Lr_in_three_dimensions():
    r = 0.8
    got = float(Lr_eval(UnitBall(3), r, np.eye(3), quad=QuadratureConfig(n_ang=64)))
    assert got == pytest.approx(ball_Lr_oracle(r, np.eye(3), n=3), rel=1e-10)


def test_Lr_vanishes_when_nothing_leaves_the_r_ball():
    assert float(Lr_eval(BALL, 0.9, 0.1 * np.eye(2))) == 0.0


def test_Lr_is_positive_and_convex():
    rng = np.random.default_rng(0)
    r = 0.9
    for _ in range(100):
        B1, B2 = rng.normal(size=(2, 2, 2)) * 0.2
        A1, A2 = np.eye(2) + B1 @ B1.T, np.eye(2) + B2 @ B2.T
        v1, v2 = 0.1 * rng.normal(size=(2, 2))
        e1 = Lr_eval(DIAMOND, r, A1, v1, QUAD)
        e2 = Lr_eval(DIAMOND, r, A2, v2, QUAD)
        em = Lr_eval(DIAMOND, r, (A1 + A2) / 2, (v1 + v2) / 2, QUAD)
        L1, L2, Lm = float(e1), float(e2), float(em)
        assert L1 > 0 and L2 > 0 and Lm > 0
        slack = 2 * (e1.error + e2.error + em.error) + 1e-5 * max(L1, L2)
        assert Lm <= 0.5 * (L1 + L2) + slack


def test_Lr_orthogonal_invariance():
    r = 0.9
    R = special_ortho_group.rvs(2, random_state=2)
    A = np.array([[1.1, 0.15], [0.15, 0.95]])
    v = np.array([0.05, -0.02])
    base = float(Lr_eval(DIAMOND, r, A, v, QUAD))
    turned = float(Lr_eval(transform(DIAMOND, R), r, R @ A @ R.T, R @ v, QUAD))
    assert turned == pytest.approx(base, rel=1e-5)


def test_Ir_at_zero_is_Lr_at_identity():
    r = 0.9
    assert float(Ir_eval(DIAMOND, r, np.zeros((2, 2)), quad=QUAD)) == pytest.approx(
        float(Lr_eval(DIAMOND, r, np.eye(2), quad=QUAD)), rel=1e-12)


def test_Ir_through_the_determinant():
    r = 0.9
    M = np.diag([0.8, -0.5])
    w = np.array([0.3, 0.1])
    B = np.eye(2) + (1 - r) * M
    expected = np.linalg.det(B) * float(Lr_eval(DIAMOND, r, B, (1 - r) * w, QUAD))
    assert float(Ir_eval(DIAMOND, r, SymMatrix(M), w, QUAD)) == pytest.approx(expected, rel=1e-12)


def test_Ir_singular_deformation():
    with pytest.raises(SingularDeformation):
        Ir_eval(BALL, 0.9, np.diag([-10.0, 10.0]))


def test_Ir_approaches_I1_on_the_ball():
    M = np.diag([0.5, -0.5])
    I1 = I1_sphere(CONV, M)
    Ir = float(Ir_eval(BALL, 0.99, M, quad=QUAD))
    assert Ir == pytest.approx(I1, abs=5e-2)
    # and it gets closer as r grows
    far = float(Ir_eval(BALL, 0.8, M, quad=QUAD))
    assert abs(Ir - I1) < abs(far - I1)


def test_Ir_approaches_I1_with_translations():
    rng = np.random.default_rng(9)
    near, far = [], []
    for _ in range(10):
        a, b = rng.normal(size=2)
        M = np.array([[a, b], [b, -a]])
        w = rng.normal(size=2)
        scale = rng.uniform(0.3, 1.0) / np.sqrt(np.sum(M ** 2) + w @ w)
        M, w = scale * M, scale * w
        I1 = I1_sphere(CONV, M, w)
        near.append(abs(float(Ir_eval(BALL, 0.99, M, w, QUAD)) - I1))
        far.append(abs(float(Ir_eval(BALL, 0.9, M, w, QUAD)) - I1))
    assert max(near) <= 5e-2
    assert max(near) < max(far)


# -------- I_1 --------

def test_I1_at_origin():
    assert I1_sphere(CONV, np.zeros((2, 2))) == pytest.approx(2 * np.pi * 2 / 3, rel=1e-13)
    assert I1_sphere(CONV, np.zeros((3, 3)), N=256) == pytest.approx(4 * np.pi * 2 / 3, rel=1e-12)


@pytest.mark.parametrize("a", [0.3, 1.0, 2.5])
def test_I1_against_angular_oracle(a):
    assert I1_sphere(CONV, np.diag([a, -a])) == pytest.approx(I1_oracle(a), abs=1e-8)


def test_I1_minimizer_on_the_circle_is_origin():
    res = minimize_I1(CONV)
    assert res.converged
    assert res.minimizer.norm() <= 1e-9
    assert res.value == pytest.approx(2 * np.pi * 2 / 3, rel=1e-12)


# -------- minimization --------

def test_ball_flow_minimizer_is_identity():
    res = minimize_Lr(BALL, 0.9, FlowConfig(quad=QUAD))
    assert res.distance <= 1e-8
    assert res.value == pytest.approx(4 * np.pi / 3, rel=1e-9)
    assert res.iso_residual <= 1e-6 and res.center_residual <= 1e-6


@pytest.mark.parametrize("r", [0.9, 0.99])
def test_diamond_flow_minimizer(r):
    res = minimize_Lr(DIAMOND, r, FlowConfig(quad=QUAD))
    assert np.linalg.det(res.A.entries) == pytest.approx(1.0, abs=1e-8)
    assert res.distance <= 0.1
    assert res.iso_residual <= 1e-3


@pytest.fixture(scope="module")
def heptagon_flow():
    t = np.array([0.0, 0.7, 1.9, 2.6, 3.5, 4.4, 5.5])
    body = to_loewner(VPolytope(np.column_stack([np.cos(t), np.sin(t)])))[0]
    return body, [minimize_Lr(body, r, FlowConfig(quad=QUAD)) for r in HEPTAGON_RS]


def test_heptagon_flow_approaches_loewner_position(heptagon_flow):
    _, results = heptagon_flow
    dist = [res.distance for res in results]
    assert dist[0] > dist[1] > dist[2]
    assert dist[-1] <= 0.05
    assert abs(results[-1].trace_ratio) < abs(results[0].trace_ratio)
    for res in results:
        assert res.to_json()["det"] == pytest.approx(1.0, abs=1e-8)
        assert res.iso_residual <= 1e-3 and res.center_residual <= 1e-3


def test_heptagon_minimizer_is_more_isotropic_than_identity(heptagon_flow):
    body, results = heptagon_flow
    for r, res in zip(HEPTAGON_RS, results):
        iso, _, _ = stationarity_residual(body, r, np.eye(2), quad=QUAD)
        assert iso >= 100 * res.iso_residual


def test_flow_json():
    out = minimize_Lr(BALL, 0.9, FlowConfig(quad=QUAD)).to_json()
    assert out["det"] == pytest.approx(1.0)
    assert set(out) >= {"r", "A", "v", "M", "w", "value", "iso_residual", "center_residual", "lambda"}
    assert out["trace_ratio"] is None


def test_flow_rejects_other_dimensions():
    with pytest.raises(ValueError):
        minimize_Lr(UnitBall(4), 0.9)


def test_sl_matrix_has_unit_determinant():
    rng = np.random.default_rng(1)
    for n in (2, 3):
        A = sl_matrix(rng.normal(size=n * (n + 1) // 2 - 1), n)
        assert np.linalg.det(A) == pytest.approx(1.0, rel=1e-12)
        assert np.allclose(A, A.T)
        assert np.all(np.linalg.eigvalsh(A) > 0)


# -------- stationarity --------

def test_ball_is_stationary():
    iso, cen, lam = stationarity_residual(BALL, 0.9, np.eye(2), quad=QUAD)
    assert iso <= 1e-6 and cen <= 1e-6
    assert lam > 0


def test_non_stationary_point_has_larger_residual():
    r = 0.95
    at_min = minimize_Lr(DIAMOND, r, FlowConfig(quad=QUAD))
    iso, _, _ = stationarity_residual(DIAMOND, r, np.diag([1.2, 1 / 1.2]), quad=QUAD)
    assert iso >= 10 * at_min.iso_residual
    assert iso >= 1e-3


# -------- r -> 1 checks --------

def test_derivative_check_on_ball():
    report = derivative_check(BALL, [0.9, 0.95], FlowConfig(quad=QUAD))
    assert not report.exploratory
    assert all(row.deviation <= 1e-6 for row in report.rows)
    assert report.to_json()["rows"][0]["r"] == 0.9


def test_derivative_check_on_polytope_is_exploratory():
    report = derivative_check(DIAMOND, [0.9], FlowConfig(quad=QUAD))
    assert report.exploratory
    assert report.rows[0].deviation is None


def test_derivative_check_reuses_results():
    res = minimize_Lr(BALL, 0.9, FlowConfig(quad=QUAD))
    report = derivative_check(BALL, [0.9], results={0.9: res}, limit=SymPair.zeros(2))
    assert report.rows[0].deviation == pytest.approx(res.distance / 0.1, abs=1e-12)


def test_weak_convergence_on_ball():
    rows = weak_convergence_check(BALL, [0.9, 0.99], quad=QUAD)
    by = {(row["r"], row["test"]): row for row in rows}
    for r in (0.9, 0.99):
        assert by[(r, "constant")]["limit"] == pytest.approx(2 * np.pi)
        assert by[(r, "constant")]["value"] == pytest.approx(2 * np.pi, rel=1e-9)
        assert abs(by[(r, "odd")]["value"]) <= 1e-9
        assert by[(r, "near_origin")]["value"] == 0.0


def test_coercivity_growth():
    r = 0.9
    base = float(Lr_eval(BALL, r, np.eye(2), quad=QUAD))
    d = SymPair(SymMatrix(np.diag([1.0, -1.0]) / np.sqrt(2)), np.zeros(2))
    profile = coercivity_profile(BALL, r, d, [3.0, 6.0], QUAD)
    assert [n for n, _ in profile] == [3.0, 6.0]
    assert profile[1][1] > profile[0][1] > base
    assert profile[1][1] >= 10 * base


@pytest.mark.parametrize("r", [0.6, 0.8, 0.95])
@pytest.mark.parametrize("d", [
    SymPair(SymMatrix(np.diag([1.0, -1.0]) / np.sqrt(2)), np.zeros(2)),
    SymPair(SymMatrix(np.zeros((2, 2))), np.array([1.0, 0.0])),
])
def test_Lr_grows_tenfold_at_norm_ten(r, d):
    base = float(Lr_eval(BALL, r, np.eye(2), quad=QUAD))
    [(_, far)] = coercivity_profile(BALL, r, d, [10.0], QUAD)
    assert far >= 10 * base


@pytest.mark.parametrize("r", [0.6, 0.8, 0.95])
@pytest.mark.parametrize("body", [BALL, DIAMOND], ids=["ball", "diamond"])
def test_Lr_at_loewner_position_is_bounded(r, body):
    f_mass, _ = quad(profile_f, -1.0, 1.0)
    assert f_mass == pytest.approx(2.0)
    assert float(Lr_eval(body, r, np.eye(2), quad=QUAD)) <= 2 * np.pi * f_mass


def test_coercivity_rejects_small_norms():
    d = SymPair(SymMatrix(np.diag([1.0, -1.0])), np.zeros(2))
    with pytest.raises(ValueError):
        coercivity_profile(BALL, 0.9, d, [1.0])
