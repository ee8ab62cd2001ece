"""The r-scaled functionals L_r and I_r, their minimization over SL ∩ sym+ x R^n,
and the r -> 1 checks against the sphere functional I_1.

Profiles: f(s) = (s + 1)_+ and g(s) = 1 below -1, (1 - s)/2 on (-1, 1), 0 above 1,
rescaled as h_r(s) = h((s - 1)/(1 - r)). With these, f * g(-.) is the PaperConv F.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import expm, expm_frechet
from scipy.optimize import brentq, minimize

from .body import ConvexBody, UnitBall
from .errors import MaxIterations, SingularDeformation
from .loewner import ContactSet
from .minimize import MinimizeConfig, MinimizeResult, minimize_Ic
from .objective import DiscreteMeasureProblem, FVariant, ObjectiveF
from .quadrature import Estimate, QuadratureConfig, ShellGrid, refine, shell_grid, sphere_nodes
from .symspace import SymMatrix, SymPair, basis_stack, matrix_to_coords, sym0_dim

log = logging.getLogger(__name__)

MAX_COND = 1e12


# profiles

def profile_f(s):
    return np.clip(np.asarray(s, dtype=float) + 1.0, 0.0, None)


def profile_f_prime(s):
    return np.where(np.asarray(s, dtype=float) > -1.0, 1.0, 0.0)


def profile_g(s):
    return np.clip((1.0 - np.asarray(s, dtype=float)) / 2.0, 0.0, 1.0)


def rescale(h: Callable, r: float) -> Callable:
    """h_r(s) = h((s - 1)/(1 - r))."""
    _check_r(r)
    return lambda s: h((np.asarray(s, dtype=float) - 1.0) / (1.0 - r))


def _check_r(r: float) -> None:
    if not (0.5 < r < 1.0):
        raise ValueError(f"r must lie in (1/2, 1), got {r}")


@dataclass(frozen=True)
class ProfileReport:
    f_zero_left: bool
    f_increasing: bool
    f_convex: bool
    g_one_left: bool
    g_zero_right: bool
    g_positive_inside: bool
    g_nonincreasing: bool

    @property
    def ok(self) -> bool:
        return all(vars(self).values())


def check_profiles(num: int = 4001) -> ProfileReport:
    s = np.linspace(-4.0, 4.0, num)
    f, g = profile_f(s), profile_g(s)
    left, right, mid = s <= -1.0, s >= 1.0, (s > -1.0) & (s < 1.0)
    return ProfileReport(
        f_zero_left=bool(np.all(f[left] == 0.0)),
        f_increasing=bool(np.all(np.diff(f[s >= -1.0]) > 0.0)),
        f_convex=bool(np.all(f[:-2] - 2.0 * f[1:-1] + f[2:] >= -1e-12)),
        g_one_left=bool(np.all(g[left] == 1.0)),
        g_zero_right=bool(np.all(g[right] == 0.0)),
        g_positive_inside=bool(np.all(g[mid] > 0.0)),
        g_nonincreasing=bool(np.all(np.diff(g) <= 0.0)),
    )


# integrals over a fixed shell grid

def _prepare(A: Any, v: Any, n: int) -> Tuple[np.ndarray, np.ndarray]:
    A = np.asarray(A.entries if isinstance(A, SymMatrix) else A, dtype=float)
    v = np.zeros(n) if v is None else np.asarray(v, dtype=float).reshape(-1)
    if A.shape != (n, n) or v.shape != (n,):
        raise ValueError(f"expected an {n}x{n} matrix and an {n}-vector")
    return A, v


def _value(grid: ShellGrid) -> float:
    r = grid.r
    fr = (np.linalg.norm(grid.y, axis=1) - r) / (1.0 - r)
    return float(grid.integrate(fr)) / (1.0 - r)


def _gradient(grid: ShellGrid) -> Tuple[np.ndarray, np.ndarray]:
    """d/dA and d/dv of L_r: (1-r)^-2 int 1[|y|>r] g_r (y/|y|) x^T dx and its vector part."""
    c = 1.0 / (1.0 - grid.r) ** 2
    u = grid.y / np.linalg.norm(grid.y, axis=1, keepdims=True)
    gA = c * grid.integrate(np.einsum("ji,jk->jik", u, grid.x))
    gv = c * grid.integrate(u)
    return gA, gv


def _moments(grid: ShellGrid, detA: float) -> Tuple[np.ndarray, np.ndarray]:
    """T = det A/(1-r) int 1[|y|>r] g_r y y^T/|y| dx and b, the matching vector integral."""
    c = detA / (1.0 - grid.r)
    s = np.linalg.norm(grid.y, axis=1, keepdims=True)
    T = c * grid.integrate(np.einsum("ji,jk->jik", grid.y / s, grid.y))
    b = c * grid.integrate(grid.y / s)
    return 0.5 * (T + T.T), b


def Lr_eval(body: ConvexBody, r: float, A: Any, v: Any = None,
            quad: Optional[QuadratureConfig] = None) -> Estimate:
    """L_r(A, v) = 1/(1-r) int f_r(|A x + v|) g_r(||x||_K) dx, with an error estimate."""
    _check_r(r)
    quad = quad or QuadratureConfig()
    A, v = _prepare(A, v, body.dim)
    return refine(lambda N: _value(shell_grid(body, r, A, v, N, quad)), quad)


def Ir_eval(body: ConvexBody, r: float, M: Any, w: Any = None,
            quad: Optional[QuadratureConfig] = None) -> Estimate:
    """I_r(M, w) through I_r(M, w) = |det B| L_r(B, (1-r) w) with B = I + (1-r) M."""
    _check_r(r)
    n = body.dim
    M, w = _prepare(M, w, n)
    B = np.eye(n) + (1.0 - r) * M
    cond = np.linalg.cond(B)
    if not np.isfinite(cond) or cond >= MAX_COND:
        raise SingularDeformation(f"I + (1-r)M is singular (condition number {cond:.3e})")
    det = abs(float(np.linalg.det(B)))
    L = Lr_eval(body, r, B, (1.0 - r) * w, quad)
    return Estimate(det * L.value, det * L.error, L.n_ang)


# the sphere functional

def I1_sphere(F: ObjectiveF, M: Any, w: Any = None, N: int = 4096) -> float:
    """int_S F(<xi, M xi + w>) dxi; trapezoid on the circle, product Gauss rule on S^2."""
    M = np.asarray(M.entries if isinstance(M, SymMatrix) else M, dtype=float)
    n = M.shape[0]
    w = np.zeros(n) if w is None else np.asarray(w, dtype=float)
    xi, wt = sphere_nodes(n, N)
    z = np.einsum("ij,jk,ik->i", xi, M, xi) + xi @ w
    return float(wt @ F.eval(z))


def sphere_problem(F: ObjectiveF, N: int = 1024) -> DiscreteMeasureProblem:
    """I_1 on the circle as a counting-measure problem with F scaled by the trapezoid weight."""
    xi, wt = sphere_nodes(2, N)
    return DiscreteMeasureProblem(ContactSet(xi, source="circle"), ObjectiveF(F.variant, F.scale * wt[0]))


def minimize_I1(F: ObjectiveF, N: int = 1024, cfg: Optional[MinimizeConfig] = None) -> MinimizeResult:
    return minimize_Ic(sphere_problem(F, N), cfg)


# minimization over SL ∩ sym+ x R^n

@dataclass(frozen=True)
class FlowConfig:
    quad: QuadratureConfig = field(default_factory=QuadratureConfig)
    grad_tol: float = 1e-6
    max_iter: int = 200

    def __post_init__(self):
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass(frozen=True, eq=False)
class FlowResult:
    r: float
    A: SymMatrix
    v: np.ndarray
    value: float
    value_error: float
    iso_residual: float
    center_residual: float
    lam: float
    iterations: int
    n_ang: int

    @property
    def M(self) -> np.ndarray:
        return (self.A.entries - np.eye(self.A.dim)) / (1.0 - self.r)

    @property
    def w(self) -> np.ndarray:
        return self.v / (1.0 - self.r)

    @property
    def distance(self) -> float:
        """||A_r - I||_F + |v_r|."""
        return float(np.linalg.norm(self.A.entries - np.eye(self.A.dim)) + np.linalg.norm(self.v))

    @property
    def trace_ratio(self) -> Optional[float]:
        nm = float(np.linalg.norm(self.M))
        return float(np.trace(self.M)) / nm if nm > 1e-12 else None

    def to_json(self) -> Dict[str, Any]:
        return {
            "r": self.r,
            "A": self.A.entries.tolist(),
            "v": self.v.tolist(),
            "M": self.M.tolist(),
            "w": self.w.tolist(),
            "value": self.value,
            "iso_residual": self.iso_residual,
            "center_residual": self.center_residual,
            "lambda": self.lam,
            "trace_ratio": self.trace_ratio,
            "det": float(np.linalg.det(self.A.entries)),
        }


def sl_matrix(s: np.ndarray, n: int) -> np.ndarray:
    """expm of the traceless symmetric matrix with chart coordinates s; det = 1."""
    S = np.tensordot(np.asarray(s, dtype=float), basis_stack(n), axes=1)
    return expm(S)


def minimize_Lr(body: ConvexBody, r: float, cfg: Optional[FlowConfig] = None) -> FlowResult:
    """BFGS on (s, v) with A = expm(S(s)), started from (I, 0) at a fixed angular resolution."""
    _check_r(r)
    if body.dim not in (2, 3):
        raise ValueError("flow computations are limited to n in (2, 3)")
    cfg = cfg or FlowConfig()
    n, k = body.dim, sym0_dim(body.dim)
    basis = basis_stack(n)
    N = refine(lambda N: _value(shell_grid(body, r, np.eye(n), np.zeros(n), N, cfg.quad)), cfg.quad).n_ang

    def fun(p):
        S = np.tensordot(p[:k], basis, axes=1)
        A, v = expm(S), p[k:]
        grid = shell_grid(body, r, A, v, N, cfg.quad)
        gA, gv = _gradient(grid)
        gs = np.array([np.sum(gA * expm_frechet(S, B, compute_expm=False)) for B in basis])
        return _value(grid), np.concatenate([gs, gv])

    res = minimize(fun, np.zeros(k + n), jac=True, method="BFGS",
                   options={"gtol": cfg.grad_tol, "maxiter": cfg.max_iter})
    if res.nit >= cfg.max_iter and not res.success:
        raise MaxIterations(f"flow minimization at r={r} did not converge in {cfg.max_iter} iterations")
    if not res.success:
        log.warning("minimize_Lr(r=%g): %s (|grad| %.3e)", r, res.message, np.max(np.abs(res.jac)))

    A = sl_matrix(res.x[:k], n)
    A = 0.5 * (A + A.T)
    A /= np.linalg.det(A) ** (1.0 / n)
    v = np.array(res.x[k:])
    L = Lr_eval(body, r, A, v, cfg.quad)
    iso, cen, lam = stationarity_residual(body, r, A, v, cfg.quad)
    log.debug("minimize_Lr(r=%g): %d iterations, value %.8f, residuals %.2e / %.2e",
              r, res.nit, float(L), iso, cen)
    return FlowResult(r, SymMatrix(A), v, float(L), L.error, iso, cen, lam, int(res.nit), N)


def stationarity_residual(body: ConvexBody, r: float, A: Any, v: Any = None,
                          quad: Optional[QuadratureConfig] = None) -> Tuple[float, float, float]:
    """(||T - lam I||_F / lam, |b| / lam, lam) with lam = tr T / n."""
    _check_r(r)
    quad = quad or QuadratureConfig()
    n = body.dim
    A, v = _prepare(A, v, n)
    detA = float(np.linalg.det(A))

    def both(N):
        T, b = _moments(shell_grid(body, r, A, v, N, quad), detA)
        return np.concatenate([T.reshape(-1), b])

    est = refine(both, quad)
    T, b = est.value[:n * n].reshape(n, n), est.value[n * n:]
    lam = float(np.trace(T)) / n
    return float(np.linalg.norm(T - lam * np.eye(n))) / lam, float(np.linalg.norm(b)) / lam, lam


# r -> 1 checks

@dataclass(frozen=True)
class DerivativeRow:
    r: float
    slope_M: List[List[float]]
    slope_w: List[float]
    deviation: Optional[float]


@dataclass(frozen=True)
class DerivativeReport:
    rows: List[DerivativeRow]
    exploratory: bool

    def to_json(self) -> Dict[str, Any]:
        return {"exploratory": self.exploratory, "rows": [vars(row) for row in self.rows]}


def derivative_check(body: ConvexBody, rs: Sequence[float], cfg: Optional[FlowConfig] = None,
                     limit: Optional[SymPair] = None,
                     results: Optional[Mapping[float, FlowResult]] = None) -> DerivativeReport:
    """Slopes ((A_r, v_r) - (I, 0))/(r - 1) against -(M0, w0), the I_1 minimizer.

    On the unit ball (M0, w0) comes from minimizing I_1 with the PaperConv F.
    For polytopes I_1 has no surface to live on; slopes are reported without a
    reference unless ``limit`` is given.
    """
    n = body.dim
    if limit is None and isinstance(body, UnitBall):
        limit = (minimize_I1(ObjectiveF(FVariant.PAPER_CONV)).minimizer if n == 2 else SymPair.zeros(n))
    rows = []
    for r in rs:
        res = (results or {}).get(r) or minimize_Lr(body, r, cfg)
        sM = (res.A.entries - np.eye(n)) / (r - 1.0)
        sw = res.v / (r - 1.0)
        dev = None
        if limit is not None:
            dev = float(np.sqrt(np.sum((sM + limit.M.entries) ** 2) + np.sum((sw + limit.w) ** 2)))
        rows.append(DerivativeRow(float(r), sM.tolist(), sw.tolist(), dev))
    return DerivativeReport(rows, exploratory=limit is None)


def _constant(y: np.ndarray) -> np.ndarray:
    return np.ones(len(y))


def _odd(y: np.ndarray) -> np.ndarray:
    return y[:, 0] * np.clip(3.0 - np.linalg.norm(y, axis=1), 0.0, None)


def _near_origin(y: np.ndarray) -> np.ndarray:
    return np.clip(0.5 - np.linalg.norm(y, axis=1), 0.0, None)


DEFAULT_TEST_FNS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "constant": _constant,
    "odd": _odd,
    "near_origin": _near_origin,
}


def weak_convergence_check(body: ConvexBody, rs: Sequence[float],
                           test_fns: Optional[Mapping[str, Callable[[np.ndarray], np.ndarray]]] = None,
                           F: Optional[ObjectiveF] = None, limit: Optional[SymPair] = None,
                           quad: Optional[QuadratureConfig] = None, N: int = 4096) -> List[Dict[str, Any]]:
    """Compare 1/(1-r) int d(y) (f')_r(|y|)/|y| g_r(||A^-1 (y - v)||_K) dy with
    int_S d F'(<xi, M0 xi + w0>) dxi, where A = I + (1-r) M0 and v = (1-r) w0.
    """
    test_fns = test_fns or DEFAULT_TEST_FNS
    F = F or ObjectiveF(FVariant.PAPER_CONV)
    quad = quad or QuadratureConfig()
    n = body.dim
    limit = limit or SymPair.zeros(n)
    M0, w0 = limit.M.entries, limit.w
    xi, wt = sphere_nodes(n, N)
    dens = wt * F.prime(np.einsum("ij,jk,ik->i", xi, M0, xi) + xi @ w0)
    targets = {name: float(dens @ fn(xi)) for name, fn in test_fns.items()}

    rows = []
    for r in rs:
        _check_r(r)
        A = np.eye(n) + (1.0 - r) * M0
        v = (1.0 - r) * w0
        c = abs(float(np.linalg.det(A))) / (1.0 - r)

        def values(Nang, A=A, v=v, c=c, r=r):
            grid = shell_grid(body, r, A, v, Nang, quad)
            s = np.linalg.norm(grid.y, axis=1)
            return np.array([c * grid.integrate(fn(grid.y) / s) for fn in test_fns.values()])

        est = refine(values, quad)
        for (name, target), got in zip(targets.items(), est.value):
            rows.append({"r": float(r), "test": name, "value": float(got), "limit": target,
                         "deviation": abs(float(got) - target)})
    return rows


def coercivity_profile(body: ConvexBody, r: float, direction: SymPair, norms: Sequence[float],
                       quad: Optional[QuadratureConfig] = None) -> List[Tuple[float, float]]:
    """L_r along (expm(t S), t w) at the parameters t where ||(A, v)|| hits each requested norm."""
    n = body.dim
    d = direction.traceless()
    s, w = matrix_to_coords(d.M), d.w
    size = lambda t: float(np.sqrt(np.sum(sl_matrix(t * s, n) ** 2) + t * t * (w @ w)))
    out = []
    for target in norms:
        if target <= size(0.0):
            raise ValueError(f"norm {target} is below ||(I, 0)|| = {size(0.0):.6g}")
        hi = 1.0
        while size(hi) < target:
            hi *= 2.0
        t = brentq(lambda t: size(t) - target, 0.0, hi)
        out.append((float(target), float(Lr_eval(body, r, sl_matrix(t * s, n), t * w, quad))))
    return out
