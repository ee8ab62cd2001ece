"""Minimum-volume enclosing ellipsoids, Loewner position and contact points."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy.linalg import eigh
from scipy.special import gamma

from .body import ConvexBody, LinearImage, PNormBall, UnitBall, transform
from .config import DEFAULT_CONTACT_TOL, DEFAULT_MVEE_EPS, MVEE_MAX_ITER, SUPPORT_WEIGHT_FACTOR
from .errors import BodyError, DegenerateInput, MaxIterations, TooFewContacts
from .symspace import SymMatrix

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Ellipsoid:
    """{x : (x - c)^T Q (x - c) <= 1} with Q positive definite."""
    shape: SymMatrix
    center: np.ndarray
    weights: Optional[np.ndarray] = None   # dual weights when produced by mvee
    iterations: int = 0

    def __post_init__(self):
        Q = self.shape if isinstance(self.shape, SymMatrix) else SymMatrix(self.shape)
        object.__setattr__(self, "shape", Q)
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float).reshape(-1))
        if np.linalg.eigvalsh(Q.entries)[0] <= 0:
            raise DegenerateInput("ellipsoid shape matrix is not positive definite")

    @property
    def dim(self) -> int:
        return self.shape.dim

    def levels(self, points: Any) -> np.ndarray:
        """(p - c)^T Q (p - c) for each row p."""
        d = np.atleast_2d(points) - self.center
        return np.einsum("ij,jk,ik->i", d, self.shape.entries, d)

    def contains(self, points: Any, slack: float = 0.0) -> np.ndarray:
        return self.levels(points) <= 1.0 + slack

    def volume(self) -> float:
        n = self.dim
        unit = np.pi ** (n / 2.0) / gamma(n / 2.0 + 1.0)
        return float(unit / np.sqrt(np.linalg.det(self.shape.entries)))

    def support_mask(self, factor: float = SUPPORT_WEIGHT_FACTOR) -> np.ndarray:
        if self.weights is None:
            raise ValueError("ellipsoid carries no dual weights")
        return self.weights > factor / len(self.weights)

    def to_json(self) -> Dict[str, Any]:
        return {"Q": self.shape.entries.tolist(), "center": self.center.tolist()}


def mvee(points: Any, eps: float = DEFAULT_MVEE_EPS, max_iter: int = MVEE_MAX_ITER) -> Ellipsoid:
    """Khachiyan barycentric ascent with Todd-Yildirim drop steps.

    Stops once every point satisfies (p - c)^T Q (p - c) <= 1 + eps and every
    point carrying dual weight sits at level >= 1 - eps.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    m, n = P.shape
    if not (0 < eps <= 0.1):
        raise ValueError(f"eps must lie in (0, 0.1], got {eps}")
    lifted = np.hstack([P, np.ones((m, 1))])
    if m < n + 1 or np.linalg.matrix_rank(lifted) < n + 1:
        raise DegenerateInput("points do not affinely span R^n")

    d = n + 1
    u = np.full(m, 1.0 / m)
    for it in range(max_iter + 1):
        X = lifted.T @ (u[:, None] * lifted)
        kappa = np.einsum("ij,ij->i", lifted, np.linalg.solve(X, lifted.T).T)
        supp = u > 0
        j = int(np.argmax(kappa))
        i = int(np.flatnonzero(supp)[np.argmin(kappa[supp])])
        excess = (kappa[j] - 1.0) / n - 1.0
        deficit = 1.0 - (kappa[i] - 1.0) / n
        if excess <= eps and deficit <= eps:
            break
        if it == max_iter:
            raise MaxIterations(f"mvee did not reach eps={eps:g} in {max_iter} iterations "
                                f"(excess {excess:.3e}, deficit {deficit:.3e})")
        if kappa[j] / d - 1.0 >= 1.0 - kappa[i] / d:
            tau = (kappa[j] - d) / (d * (kappa[j] - 1.0))
            u *= 1.0 - tau
            u[j] += tau
        else:
            # away step; the bound drops u_i to zero exactly
            tau = max((kappa[i] - d) / (d * (kappa[i] - 1.0)), -u[i] / (1.0 - u[i]))
            u *= 1.0 - tau
            u[i] += tau
            u = np.maximum(u, 0.0)
            u /= u.sum()

    c = P.T @ u
    S = (P.T * u) @ P - np.outer(c, c)
    Q = np.linalg.inv(S) / n
    log.debug("mvee: %d points in R^%d, %d iterations", m, n, it)
    return Ellipsoid(SymMatrix(0.5 * (Q + Q.T)), c, weights=u, iterations=it)


def _sqrt_spd(Q: np.ndarray) -> np.ndarray:
    w, V = eigh(Q)
    return (V * np.sqrt(w)) @ V.T


def _is_orthogonal(A: np.ndarray, tol: float = 1e-10) -> bool:
    return np.allclose(A.T @ A, np.eye(len(A)), atol=tol)


def pnorm_loewner_radius(p: float, n: int) -> float:
    """Euclidean radius of the Loewner ball of the unit l_p ball."""
    return float(n ** max(0.0, 0.5 - 1.0 / p))


def to_loewner(body: ConvexBody, eps: float = DEFAULT_MVEE_EPS) -> Tuple[ConvexBody, np.ndarray, np.ndarray]:
    """Return (A K + v, A, v) with A symmetric positive definite and MVEE(A K + v) = unit ball."""
    n = body.dim
    if isinstance(body, UnitBall):
        return body, np.eye(n), np.zeros(n)
    if isinstance(body, PNormBall):
        s = 1.0 / (body.radius * pnorm_loewner_radius(body.p, n))
        A = s * np.eye(n)
        return transform(body, A, None), A, np.zeros(n)
    if isinstance(body, LinearImage) and isinstance(body.base, UnitBall):
        # K = B E + b is an ellipsoid; map it back onto the ball with the SPD factor
        A = np.linalg.inv(_sqrt_spd(body.A @ body.A.T))
        v = -A @ body.v
        return UnitBall(n), A, v
    if not body.is_polytope:
        raise BodyError("smooth bodies other than balls must be supplied in Loewner position")

    E = mvee(body.vertices, eps)
    A = _sqrt_spd(E.shape.entries)
    v = -A @ E.center
    log.debug("to_loewner: |A - I|_F = %.3e, |v| = %.3e", np.linalg.norm(A - np.eye(n)), np.linalg.norm(v))
    return transform(body, A, v), A, v


@dataclass(frozen=True, eq=False)
class ContactSet:
    """Unit vectors of S^{n-1} on the boundary of a body in Loewner position.

    ``full_sphere`` marks the ball, whose contact set is all of S^{n-1}; then
    ``points`` is empty.
    """
    points: np.ndarray
    tol: float = DEFAULT_CONTACT_TOL
    source: str = ""
    full_sphere: bool = False
    dim_: int = field(default=0, repr=False)

    def __post_init__(self):
        P = np.asarray(self.points, dtype=float)
        if P.ndim == 1:
            P = P.reshape(0, self.dim_) if P.size == 0 else P[None, :]
        if P.size:
            norms = np.linalg.norm(P, axis=1)
            if np.any(np.abs(norms - 1.0) > 1e-10):
                raise BodyError("contact points must be unit vectors")
        object.__setattr__(self, "points", P)
        if not self.dim_:
            object.__setattr__(self, "dim_", P.shape[1])

    @property
    def dim(self) -> int:
        return self.dim_

    @property
    def m(self) -> int:
        return 0 if self.full_sphere else len(self.points)

    def to_json(self) -> Dict[str, Any]:
        return {"points": self.points.tolist(), "tol": self.tol, "full_sphere": self.full_sphere}


def _candidates(body: ConvexBody) -> np.ndarray:
    if body.is_polytope:
        return body.vertices
    n = body.dim
    if isinstance(body, PNormBall):
        axes = np.vstack([np.eye(n), -np.eye(n)])
        corners = np.array(np.meshgrid(*[[-1.0, 1.0]] * n, indexing="ij")).reshape(n, -1).T / np.sqrt(n)
        return np.vstack([axes, corners])
    raise BodyError(f"no contact candidates for {type(body).__name__}")


def contact_points(body: ConvexBody, tol: float = DEFAULT_CONTACT_TOL) -> ContactSet:
    """Points of dK on S^{n-1} for a body in Loewner position, up to a tol band."""
    n = body.dim
    source = body.descriptor()["type"]
    if isinstance(body, UnitBall) or (isinstance(body, PNormBall) and body.p == 2.0 and abs(body.radius - 1.0) <= tol) \
            or (isinstance(body, LinearImage) and isinstance(body.base, UnitBall)
                and _is_orthogonal(body.A) and not np.any(body.v)):
        return ContactSet(np.zeros((0, n)), tol, source, full_sphere=True, dim_=n)

    C = _candidates(body)
    g = np.asarray(body.gauge(C))
    B = C / g[:, None]                      # boundary points along each candidate ray
    r = np.linalg.norm(B, axis=1)
    keep = np.abs(r - 1.0) <= tol
    if r.max() > 1.0 + tol:
        log.warning("body sticks out of the unit ball by %.3e; is it in Loewner position?", r.max() - 1.0)
    pts = B[keep] / r[keep, None]
    if len(pts) < n + 1:
        raise TooFewContacts(f"found {len(pts)} contact points, need at least {n + 1}")
    return ContactSet(pts, tol, source, dim_=n)
