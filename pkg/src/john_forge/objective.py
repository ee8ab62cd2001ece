"""The convex functional I_c(M, w) = sum_i F(<xi_i, M xi_i + w>) over contact points.

Everything is evaluated through the design matrix V whose row i holds the chart
coordinates of (xi_i xi_i^T - I/n, xi_i); then I_c(x) = sum F(V x).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Any, Dict, Optional

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linprog

from .config import INTERIOR_TOL
from .errors import DimensionMismatch, FullSphereContacts, LPFailure, TraceViolation
from .loewner import ContactSet
from .symspace import SymMatrix, SymPair, chart_dim, chart_matrix, coords_to_pair, pair_to_coords

log = logging.getLogger(__name__)

TRACE_TOL = 1e-10


class FVariant(str, Enum):
    EXP = "exp"
    PAPER_CONV = "paperconv"
    SHIFTED_SQUARE = "shiftedsquare"


def _exp(x):
    with np.errstate(over="ignore"):
        e = np.exp(x)
    return e, e, e


def _paper_conv(x):
    # f(s) = (s+1)_+ convolved with g(-s), g = 1 below -1, (1-s)/2 on (-1, 1), 0 above 1
    a = np.clip(x + 2.0, 0.0, None)
    left = x <= 0.0
    F = np.where(left, a ** 3 / 12.0, 0.5 * x * x + x + 2.0 / 3.0)
    dF = np.where(left, a * a / 4.0, x + 1.0)
    d2F = np.where(left, a / 2.0, 1.0)
    return F, dF, d2F


def _shifted_square(x):
    s = np.clip(x + 1.0, 0.0, None)
    return s * s, 2.0 * s, np.where(x > -1.0, 2.0, 0.0)


_KERNELS = {
    FVariant.EXP: _exp,
    FVariant.PAPER_CONV: _paper_conv,
    FVariant.SHIFTED_SQUARE: _shifted_square,
}


@dataclass(frozen=True)
class ObjectiveF:
    """An admissible F together with its first and (a.e.) second derivative.

    ``scale`` multiplies all three; it leaves minimizers unchanged.
    """
    variant: FVariant = FVariant.EXP
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "variant", FVariant(self.variant))
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")

    @classmethod
    def from_name(cls, name: str) -> "ObjectiveF":
        try:
            return cls(FVariant(name.strip().lower()))
        except ValueError:
            names = ", ".join(v.value for v in FVariant)
            raise ValueError(f"unknown F {name!r}; expected one of {names}") from None

    @property
    def name(self) -> str:
        return self.variant.value

    def _all(self, x):
        arr = np.asarray(x, dtype=float)
        vals = _KERNELS[self.variant](arr)
        out = tuple(self.scale * v for v in vals)
        if arr.ndim == 0:
            return tuple(float(v) for v in out)
        return out

    def eval(self, x):
        return self._all(x)[0]

    def prime(self, x):
        return self._all(x)[1]

    def second(self, x):
        return self._all(x)[2]


def F_eval(F: ObjectiveF, x):
    return F.eval(x)


def F_prime(F: ObjectiveF, x):
    return F.prime(x)


@dataclass(frozen=True)
class HypothesisReport:
    nonnegative: bool
    nondecreasing: bool
    convex: bool
    strictly_convex_right: bool
    positive_slope_at_zero: bool

    @property
    def ok(self) -> bool:
        return all((self.nonnegative, self.nondecreasing, self.convex,
                    self.strictly_convex_right, self.positive_slope_at_zero))


def check_F_hypotheses(F: ObjectiveF, lo: float = -6.0, hi: float = 6.0, num: int = 2401) -> HypothesisReport:
    """Grid test of: F >= 0, non-decreasing, convex, strictly convex on [0, inf), F'(0) > 0."""
    x = np.linspace(lo, hi, num)
    y = F.eval(x)
    scale = max(1.0, float(np.max(np.abs(y))))
    tol = 1e-12 * scale
    dy = np.diff(y)
    d2 = y[:-2] - 2.0 * y[1:-1] + y[2:]
    right = x[1:-1] >= 0.0
    return HypothesisReport(
        nonnegative=bool(np.all(y >= -tol)),
        nondecreasing=bool(np.all(dy >= -tol)),
        convex=bool(np.all(d2 >= -tol)),
        strictly_convex_right=bool(np.all(d2[right] > tol)),
        positive_slope_at_zero=F.prime(0.0) > 0.0,
    )


def design_matrix(points: np.ndarray) -> np.ndarray:
    """Rows are chart coordinates of (xi xi^T - I/n, xi); the -I/n part is orthogonal to the chart."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    m, n = P.shape
    outer = np.einsum("ij,ik->ijk", P, P).reshape(m, n * n)
    return np.hstack([outer @ chart_matrix(n), P])


@dataclass(frozen=True, eq=False)
class DiscreteMeasureProblem:
    """I_c for the counting measure on a finite contact set."""
    contacts: ContactSet
    F: ObjectiveF = field(default_factory=ObjectiveF)

    def __post_init__(self):
        if self.contacts.full_sphere:
            raise FullSphereContacts("the contact set is the whole sphere, not a finite counting measure")
        if self.contacts.m < 1:
            raise ValueError("need at least one contact point")

    @property
    def n(self) -> int:
        return self.contacts.dim

    @property
    def points(self) -> np.ndarray:
        return self.contacts.points

    @cached_property
    def V(self) -> np.ndarray:
        return design_matrix(self.points)

    # chart-coordinate versions used by the minimizer
    def value(self, x: np.ndarray) -> float:
        return float(np.sum(self.F.eval(self.V @ x)))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.V.T @ self.F.prime(self.V @ x)

    def hessian(self, x: np.ndarray) -> np.ndarray:
        H = (self.V.T * self.F.second(self.V @ x)) @ self.V
        return 0.5 * (H + H.T)

    def arguments(self, p: SymPair) -> np.ndarray:
        """<xi_i, M xi_i + w> for every contact point."""
        if p.n != self.n:
            raise DimensionMismatch(f"pair of dimension {p.n} for contacts in R^{self.n}")
        if abs(p.M.trace) > TRACE_TOL:
            raise TraceViolation(f"tr(M) = {p.M.trace:.3e} exceeds {TRACE_TOL:g}")
        P = self.points
        return np.einsum("ij,jk,ik->i", P, p.M.entries, P) + P @ p.w


def I_c(prob: DiscreteMeasureProblem, p: SymPair) -> float:
    return float(np.sum(prob.F.eval(prob.arguments(p))))


def grad_I_c(prob: DiscreteMeasureProblem, p: SymPair, project: bool = True) -> SymPair:
    """sum_i F'(<xi_i, M xi_i + w>) (xi_i xi_i^T, xi_i), traceless part when ``project``."""
    c = prob.F.prime(prob.arguments(p))
    P = prob.points
    G = SymPair(SymMatrix((P.T * c) @ P), P.T @ c)
    return G.traceless() if project else G


def hessian_I_c(prob: DiscreteMeasureProblem, p: SymPair) -> np.ndarray:
    """Chart-coordinate Hessian, of size n(n+3)/2 - 1."""
    return prob.hessian(pair_to_coords(p))


class Solvability(str, Enum):
    INTERIOR = "Interior"
    BOUNDARY = "Boundary"
    OUTSIDE = "Outside"


@dataclass(frozen=True, eq=False)
class SolvabilityResult:
    """Outcome of the interiority test for (I/n, 0) in the hull of (xi xi^T, xi).

    ``weights`` is the optimal convex combination (Interior, Boundary);
    ``witness`` a unit pair with <xi_i, M xi_i + w> < 0 for every i (Outside);
    ``ray`` a unit direction along which I_c does not grow (Boundary).
    """
    status: Solvability
    rank: int
    t_star: Optional[float] = None
    weights: Optional[np.ndarray] = None
    witness: Optional[SymPair] = None
    ray: Optional[SymPair] = None

    @property
    def interior(self) -> bool:
        return self.status is Solvability.INTERIOR

    @property
    def minimum_exists(self) -> bool:
        """(I/n, 0) lies in the relative interior of the hull: I_c attains its minimum,
        uniquely only when the status is Interior."""
        return self.interior or (self.status is Solvability.BOUNDARY and (self.t_star or 0.0) > INTERIOR_TOL)

    def to_json(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"status": self.status.value, "rank": self.rank, "t_star": self.t_star,
                               "minimum_exists": self.minimum_exists}
        for key in ("witness", "ray"):
            p = getattr(self, key)
            if p is not None:
                out[key] = {"M": p.M.entries.tolist(), "w": p.w.tolist()}
        if self.weights is not None:
            out["weights"] = self.weights.tolist()
        return out


def _linprog(c, **kw):
    res = linprog(c, method="highs", **kw)
    if res.status not in (0, 2):
        raise LPFailure(f"linear program failed: {res.message}")
    return res


def _unit_pair(x: np.ndarray, n: int) -> SymPair:
    return coords_to_pair(x / np.linalg.norm(x), n)


def _separating_pair(V: np.ndarray, n: int) -> SymPair:
    # min ||x||_1 s.t. V x <= -1, with x = s - t, s, t >= 0
    m, d = V.shape
    res = _linprog(np.ones(2 * d), A_ub=np.hstack([V, -V]), b_ub=-np.ones(m), bounds=[(0, None)] * (2 * d))
    if res.status != 0:
        raise LPFailure("no separating pair although the origin lies outside the hull")
    return _unit_pair(res.x[:d] - res.x[d:], n)


def _flat_ray(V: np.ndarray, n: int, rank: int, tol: float) -> Optional[SymPair]:
    if rank < V.shape[1]:
        N = null_space(V, rcond=tol)
        if N.size:
            return _unit_pair(N[:, 0], n)
    # min sum_i <a_i, x> s.t. V x <= 0 over the unit box
    m, d = V.shape
    res = _linprog(V.sum(axis=0), A_ub=V, b_ub=np.zeros(m), bounds=[(-1.0, 1.0)] * d)
    if res.status != 0 or res.fun > -tol:
        return None
    return _unit_pair(res.x, n)


def solvability_check(contacts: ContactSet, tol: float = INTERIOR_TOL) -> SolvabilityResult:
    """Decide whether (I/n, 0) is interior to conv{(xi_i xi_i^T, xi_i)}.

    Solves max t s.t. sum lam_i a_i = 0, sum lam_i = 1, lam_i >= t >= 0, with
    a_i the chart coordinates of (xi_i xi_i^T - I/n, xi_i).
    """
    if contacts.full_sphere:
        return SolvabilityResult(Solvability.INTERIOR, chart_dim(contacts.dim), t_star=None)
    if contacts.m < 1:
        raise ValueError("need at least one contact point")
    n = contacts.dim
    V = design_matrix(contacts.points)
    m, d = V.shape
    sv = np.linalg.svd(V, compute_uv=False)
    rank = int(np.sum(sv > tol))

    # variables (lam_1..lam_m, t); minimize -t
    c = np.zeros(m + 1)
    c[-1] = -1.0
    A_eq = np.zeros((d + 1, m + 1))
    A_eq[:d, :m] = V.T
    A_eq[d, :m] = 1.0
    b_eq = np.zeros(d + 1)
    b_eq[d] = 1.0
    A_ub = np.hstack([-np.eye(m), np.ones((m, 1))])
    res = _linprog(c, A_ub=A_ub, b_ub=np.zeros(m), A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * (m + 1))

    if res.status == 2:
        log.debug("solvability: origin outside the hull (rank %d of %d)", rank, d)
        return SolvabilityResult(Solvability.OUTSIDE, rank, witness=_separating_pair(V, n))

    lam = res.x[:m]
    t_star = float(res.x[-1])
    if rank == d and t_star > tol:
        return SolvabilityResult(Solvability.INTERIOR, rank, t_star, weights=lam)
    log.debug("solvability: boundary (rank %d of %d, t* = %.3e)", rank, d, t_star)
    return SolvabilityResult(Solvability.BOUNDARY, rank, t_star, weights=lam, ray=_flat_ray(V, n, rank, tol))
