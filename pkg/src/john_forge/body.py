"""Convex bodies with an evaluable gauge ||x||_K and outward normal field n^K.

Every body contains the origin in its interior. Gauges are vectorized over the
last axis: ``body.gauge(x)`` accepts shape (n,) or (..., n).
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Dict, Optional

import numpy as np
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError

from .config import NORMAL_TOL
from .errors import (
    AmbiguousNormal,
    BodyError,
    DegenerateHull,
    DescriptorError,
    OriginNotInterior,
    SingularTransform,
)

MAX_COND = 1e12
VERTEX_DIM_LIMIT = 3


def _as_points(x: Any, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != n:
        raise BodyError(f"expected points of dimension {n}, got shape {x.shape}")
    return x


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


class ConvexBody(ABC):
    """Common interface of the body variants."""
    dim: int

    @abstractmethod
    def gauge(self, x: Any) -> Any:
        ...

    @abstractmethod
    def normal(self, x: Any) -> np.ndarray:
        ...

    @abstractmethod
    def descriptor(self) -> Dict[str, Any]:
        ...

    @property
    def vertices(self) -> Optional[np.ndarray]:
        """Extreme points for polytopes, None for smooth bodies."""
        return None

    @property
    def is_polytope(self) -> bool:
        return self.vertices is not None


@dataclass(frozen=True, eq=False)
class HPolytope(ConvexBody):
    """{x : <u_j, x> <= h_j for all j} with unit normals u_j and offsets h_j > 0."""
    normals: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        U = np.atleast_2d(np.asarray(self.normals, dtype=float))
        h = np.asarray(self.offsets, dtype=float).reshape(-1)
        if U.shape[0] != h.shape[0]:
            raise BodyError(f"{U.shape[0]} normals but {h.shape[0]} offsets")
        n = U.shape[1]
        if n < 2:
            raise BodyError("bodies need dimension >= 2")
        bad = np.abs(np.linalg.norm(U, axis=1) - 1.0) > NORMAL_TOL
        if np.any(bad):
            raise BodyError(f"facet normals {np.flatnonzero(bad).tolist()} are not unit vectors")
        if np.any(h <= 0):
            raise OriginNotInterior("all offsets must be positive for 0 to be interior")
        # bounded iff the normals positively span R^n, i.e. 0 is interior to conv(U)
        if U.shape[0] < n + 1:
            raise DegenerateHull(f"{U.shape[0]} facets cannot bound a body in R^{n}")
        try:
            hull = ConvexHull(U)
        except QhullError as e:
            raise DegenerateHull(f"facet normals do not span R^{n}") from e
        if np.any(hull.equations[:, -1] >= -1e-12):
            raise DegenerateHull("facet normals do not positively span R^n; polytope is unbounded")
        object.__setattr__(self, "normals", U)
        object.__setattr__(self, "offsets", h)

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    def scores(self, x: Any) -> np.ndarray:
        x = _as_points(x, self.dim)
        return (x @ self.normals.T) / self.offsets

    def gauge(self, x: Any) -> Any:
        s = np.max(self.scores(x), axis=-1)
        return np.maximum(s, 0.0)

    def normal(self, x: Any) -> np.ndarray:
        x = _as_points(x, self.dim)
        if np.linalg.norm(x) == 0:
            raise BodyError("normal is undefined at the origin")
        s = self.scores(x)
        order = np.argsort(s)[::-1]
        top, second = s[order[0]], s[order[1]]
        # compare at the boundary point x / ||x||_K
        if top <= 0 or (top - second) / top <= NORMAL_TOL:
            raise AmbiguousNormal(f"point lies on a face shared by facets {order[0]} and {order[1]}")
        return self.normals[order[0]].copy()

    @cached_property
    def _vertices(self) -> np.ndarray:
        halfspaces = np.hstack([self.normals, -self.offsets[:, None]])
        hs = HalfspaceIntersection(halfspaces, np.zeros(self.dim))
        return _dedupe(hs.intersections)

    @property
    def vertices(self) -> np.ndarray:
        return self._vertices

    def descriptor(self) -> Dict[str, Any]:
        return {"type": "hpolytope", "normals": self.normals.tolist(), "offsets": self.offsets.tolist()}


def _dedupe(points: np.ndarray, decimals: int = 10) -> np.ndarray:
    _, idx = np.unique(np.round(points, decimals), axis=0, return_index=True)
    return points[np.sort(idx)]


@dataclass(frozen=True, eq=False)
class VPolytope(ConvexBody):
    """conv(vertices) for n <= 3, carried together with its H-representation."""
    points: np.ndarray

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.points, dtype=float))
        n = P.shape[1]
        if n > VERTEX_DIM_LIMIT:
            raise BodyError(f"vertex representation is limited to n <= {VERTEX_DIM_LIMIT}; supply an H-polytope")
        if n < 2:
            raise BodyError("bodies need dimension >= 2")
        if P.shape[0] < n + 1 or np.linalg.matrix_rank(P[1:] - P[0]) < n:
            raise DegenerateHull("vertices do not affinely span R^n")
        try:
            hull = ConvexHull(P)
        except QhullError as e:
            raise DegenerateHull(str(e).splitlines()[0]) from e
        normals, offsets = hull.equations[:, :-1], -hull.equations[:, -1]
        if np.any(offsets <= 1e-12):
            raise OriginNotInterior("origin is not strictly inside the hull")
        # qhull triangulates 3-D facets; merge coplanar pieces
        eq = _dedupe(np.hstack([normals, offsets[:, None]]))
        object.__setattr__(self, "points", P[hull.vertices])
        object.__setattr__(self, "_hrep", HPolytope(_unit(eq[:, :-1]), eq[:, -1]))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def hrep(self) -> HPolytope:
        return self._hrep  # type: ignore[attr-defined]

    def gauge(self, x: Any) -> Any:
        return self.hrep.gauge(x)

    def normal(self, x: Any) -> np.ndarray:
        return self.hrep.normal(x)

    @property
    def vertices(self) -> np.ndarray:
        return self.points

    def descriptor(self) -> Dict[str, Any]:
        return {"type": "vpolytope", "vertices": self.points.tolist()}


@dataclass(frozen=True, eq=False)
class PNormBall(ConvexBody):
    """{x : ||x||_p <= radius}, 1 < p < inf."""
    p: float
    radius: float = 1.0
    dim: int = 2

    def __post_init__(self):
        if not (1.0 < self.p < np.inf):
            raise BodyError(f"p must lie in (1, inf), got {self.p}")
        if self.radius <= 0:
            raise OriginNotInterior("radius must be positive")
        if self.dim < 2:
            raise BodyError("bodies need dimension >= 2")

    def gauge(self, x: Any) -> Any:
        x = _as_points(x, self.dim)
        g = np.linalg.norm(x, ord=self.p, axis=-1) / self.radius
        return g if x.ndim > 1 else float(g)

    def normal(self, x: Any) -> np.ndarray:
        x = _as_points(x, self.dim)
        if np.linalg.norm(x) == 0:
            raise BodyError("normal is undefined at the origin")
        g = np.sign(x) * np.abs(x / np.max(np.abs(x))) ** (self.p - 1.0)
        return _unit(g)

    def descriptor(self) -> Dict[str, Any]:
        return {"type": "pnorm", "p": float(self.p), "radius": float(self.radius), "dim": int(self.dim)}


@dataclass(frozen=True, eq=False)
class UnitBall(ConvexBody):
    dim: int = 2

    def __post_init__(self):
        if self.dim < 2:
            raise BodyError("bodies need dimension >= 2")

    def gauge(self, x: Any) -> Any:
        x = _as_points(x, self.dim)
        return np.linalg.norm(x, axis=-1) if x.ndim > 1 else float(np.linalg.norm(x))

    def normal(self, x: Any) -> np.ndarray:
        x = _as_points(x, self.dim)
        r = np.linalg.norm(x)
        if r == 0:
            raise BodyError("normal is undefined at the origin")
        return x / r

    def descriptor(self) -> Dict[str, Any]:
        return {"type": "ball", "dim": int(self.dim)}


@dataclass(frozen=True, eq=False)
class LinearImage(ConvexBody):
    """A K + v for a smooth base body K (polytopes are transformed in closed form)."""
    base: ConvexBody
    A: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        v = np.asarray(self.v, dtype=float).reshape(-1)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "_Ainv", np.linalg.inv(A))
        if np.any(v) and self.base.gauge(-self._Ainv @ v) >= 1.0:
            raise OriginNotInterior("translation moves the origin out of the body")

    @property
    def dim(self) -> int:
        return self.base.dim

    def _pull(self, y: np.ndarray) -> np.ndarray:
        return (y - self.v) @ self._Ainv.T

    def gauge(self, x: Any) -> Any:
        x = _as_points(x, self.dim)
        if not np.any(self.v):
            return self.base.gauge(x @ self._Ainv.T)
        # ||x||_{AK+v} = 1/mu where ||A^-1(mu x - v)||_K = 1; convex in mu, < 1 at mu = 0
        flat = x.reshape(-1, self.dim)
        zero = np.linalg.norm(flat, axis=1) == 0
        psi = lambda mu: self.base.gauge((mu[:, None] * flat - self.v) @ self._Ainv.T)
        lo, hi = np.zeros(len(flat)), np.ones(len(flat))
        for _ in range(200):
            grow = (psi(hi) < 1.0) & ~zero
            if not np.any(grow):
                break
            hi = np.where(grow, 2.0 * hi, hi)
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            inside = psi(mid) < 1.0
            lo, hi = np.where(inside, mid, lo), np.where(inside, hi, mid)
        out = np.where(zero, 0.0, 1.0 / np.where(zero, 1.0, 0.5 * (lo + hi)))
        return out.reshape(x.shape[:-1]) if x.ndim > 1 else float(out[0])

    def normal(self, x: Any) -> np.ndarray:
        x = _as_points(x, self.dim)
        g = self.gauge(x)
        if g == 0:
            raise BodyError("normal is undefined at the origin")
        z = self._pull(x / g)
        return _unit(self._Ainv.T @ self.base.normal(z))

    def descriptor(self) -> Dict[str, Any]:
        return {"type": "linear_image", "base": self.base.descriptor(),
                "A": self.A.tolist(), "v": self.v.tolist()}


def gauge(body: ConvexBody, x: Any) -> Any:
    """||x||_K = inf{lam > 0 : x in lam K}; 0 at the origin."""
    return body.gauge(x)


def normal(body: ConvexBody, x: Any) -> np.ndarray:
    """Unit outward normal n^K(x), homogeneous of degree 0."""
    return body.normal(x)


def vpoly_to_hpoly(body: VPolytope) -> HPolytope:
    if not isinstance(body, VPolytope):
        raise BodyError(f"expected a VPolytope, got {type(body).__name__}")
    return HPolytope(body.hrep.normals.copy(), body.hrep.offsets.copy())


def transform(body: ConvexBody, A: Any, v: Any = None) -> ConvexBody:
    """The body A K + v, whose gauge at x is the gauge of K at A^-1 (x - v) when v = 0."""
    n = body.dim
    A = np.asarray(A, dtype=float)
    v = np.zeros(n) if v is None else np.asarray(v, dtype=float).reshape(-1)
    if A.shape != (n, n) or v.shape != (n,):
        raise BodyError(f"transform of a body in R^{n} needs an {n}x{n} matrix and an {n}-vector")
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond >= MAX_COND:
        raise SingularTransform(f"condition number {cond:.3e} exceeds {MAX_COND:.0e}")
    Ainv = np.linalg.inv(A)

    if isinstance(body, VPolytope):
        return VPolytope(body.points @ A.T + v)
    if isinstance(body, HPolytope):
        # <u, A^-1 (x - v)> <= h  <=>  <A^-T u, x> <= h + <A^-T u, v>
        W = body.normals @ Ainv
        scale = np.linalg.norm(W, axis=1)
        offsets = (body.offsets + W @ v) / scale
        if np.any(offsets <= 0):
            raise OriginNotInterior("translation moves the origin out of the polytope")
        return HPolytope(W / scale[:, None], offsets)

    if not np.any(v):
        c = abs(np.linalg.det(A)) ** (1.0 / n)
        if np.allclose(A.T @ A, c * c * np.eye(n), atol=1e-12 * max(1.0, c * c)):
            # conformal maps keep balls
            if isinstance(body, UnitBall):
                return UnitBall(n) if abs(c - 1.0) <= 1e-14 else PNormBall(2.0, c, n)
            if isinstance(body, PNormBall) and np.allclose(A, c * np.eye(n), atol=1e-12 * c):
                return PNormBall(body.p, body.radius * c, n)
    return LinearImage(body, A, v)


def body_from_descriptor(desc: Dict[str, Any]) -> ConvexBody:
    """Build a body from its JSON descriptor."""
    if not isinstance(desc, dict) or "type" not in desc:
        raise DescriptorError("body descriptor must be an object with a 'type' field")
    kind = desc["type"]
    try:
        if kind == "hpolytope":
            return HPolytope(np.array(desc["normals"], dtype=float), np.array(desc["offsets"], dtype=float))
        if kind == "vpolytope":
            return VPolytope(np.array(desc["vertices"], dtype=float))
        if kind == "pnorm":
            return PNormBall(float(desc["p"]), float(desc.get("radius", 1.0)), int(desc.get("dim", 2)))
        if kind == "ball":
            return UnitBall(int(desc.get("dim", 2)))
        if kind == "linear_image":
            return LinearImage(body_from_descriptor(desc["base"]),
                               np.array(desc["A"], dtype=float), np.array(desc["v"], dtype=float))
    except (KeyError, TypeError, ValueError) as e:
        raise DescriptorError(f"malformed {kind} descriptor: {e}") from e
    raise DescriptorError(f"unknown body type {kind!r}")


def body_to_descriptor(body: ConvexBody) -> Dict[str, Any]:
    return body.descriptor()
