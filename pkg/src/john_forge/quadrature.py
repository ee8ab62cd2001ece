"""Polar quadrature over the shell where the flow integrands live.

All flow integrals have the form  int phi(A x + v, x) g_r(||x||_K) 1[|A x + v| > r] dx.
In polar coordinates x = rho * eta the radial integrand is smooth between the
breakpoints 0, r/k, (2-r)/k (k = ||eta||_K, the kinks of g_r) and the roots of
|rho A eta + v| = r, so every radial piece gets its own Gauss-Legendre rule.
In the plane the angular rule is adapted to the directions that carry mass and
split at the vertex directions of polytopes; in R^3 a product rule is used.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Tuple

import numpy as np
from scipy.special import roots_legendre

from .body import ConvexBody
from .config import threads
from .errors import QuadratureBudgetExceeded

log = logging.getLogger(__name__)

SCAN_POINTS = 4096
BISECTIONS = 48
CHUNK = 2048


@dataclass(frozen=True)
class QuadratureConfig:
    """n_ang is the starting angular node count; it is doubled up to max_ang."""
    n_ang: int = 256
    radial_order: int = 16
    angular_order: int = 8
    tol: float = 1e-6
    max_ang: int = 8192

    def __post_init__(self):
        if self.n_ang < 16 or self.max_ang < self.n_ang:
            raise ValueError("need 16 <= n_ang <= max_ang")
        if self.radial_order < 2 or self.angular_order < 2:
            raise ValueError("Gauss-Legendre orders must be at least 2")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


@lru_cache(maxsize=None)
def gauss_legendre(order: int) -> Tuple[np.ndarray, np.ndarray]:
    t, w = roots_legendre(order)
    t.flags.writeable = False
    w.flags.writeable = False
    return t, w


def circle_rule(N: int) -> Tuple[np.ndarray, np.ndarray]:
    """N-point trapezoid rule on S^1; exact for trigonometric polynomials of degree < N."""
    theta = 2.0 * np.pi * np.arange(N) / N
    return np.column_stack([np.cos(theta), np.sin(theta)]), np.full(N, 2.0 * np.pi / N)


def sphere_rule(n_pol: int, n_az: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre in cos(theta) times trapezoid in phi on S^2."""
    z, wz = gauss_legendre(n_pol)
    phi = 2.0 * np.pi * np.arange(n_az) / n_az
    s = np.sqrt(1.0 - z * z)
    dirs = np.stack([np.outer(s, np.cos(phi)), np.outer(s, np.sin(phi)),
                     np.outer(z, np.ones(n_az))], axis=-1).reshape(-1, 3)
    w = np.outer(wz, np.full(n_az, 2.0 * np.pi / n_az)).reshape(-1)
    return dirs, w


def sphere_nodes(n: int, N: int) -> Tuple[np.ndarray, np.ndarray]:
    if n == 2:
        return circle_rule(N)
    if n == 3:
        return sphere_rule(max(8, N // 4), max(16, N // 2))
    raise ValueError(f"sphere quadrature is available for n in (2, 3), got {n}")


def _unit_dirs(theta: np.ndarray) -> np.ndarray:
    return np.column_stack([np.cos(theta), np.sin(theta)])


def _supported(body: ConvexBody, A: np.ndarray, v: np.ndarray, r: float, dirs: np.ndarray) -> np.ndarray:
    # |rho A eta + v| is convex in rho, so it exceeds r on [0, rho2] iff it does at an end
    if np.linalg.norm(v) > r:
        return np.ones(len(dirs), dtype=bool)
    rho2 = (2.0 - r) / np.asarray(body.gauge(dirs))
    return np.linalg.norm(rho2[:, None] * (dirs @ A.T) + v, axis=1) > r


def _panels(lo: float, hi: float, count: int, order: int) -> Tuple[np.ndarray, np.ndarray]:
    t, w = gauss_legendre(order)
    edges = np.linspace(lo, hi, count + 1)
    h = np.diff(edges)[:, None] / 2.0
    mid = (edges[:-1] + edges[1:])[:, None] / 2.0
    return (mid + h * t).reshape(-1), (h * w).reshape(-1)


def planar_rule(body: ConvexBody, A: np.ndarray, v: np.ndarray, r: float, n_ang: int,
                order: int = 8) -> Tuple[np.ndarray, np.ndarray]:
    """Angular nodes on the directions where the shell integrand is non-zero."""
    kinks = np.empty(0)
    if body.is_polytope:
        P = body.vertices
        kinks = np.mod(np.arctan2(P[:, 1], P[:, 0]), 2.0 * np.pi)

    scan = np.sort(np.concatenate([2.0 * np.pi * np.arange(SCAN_POINTS) / SCAN_POINTS, kinks]))
    inside = _supported(body, A, v, r, _unit_dirs(scan))
    if not inside.any():
        return np.zeros((0, 2)), np.zeros(0)

    # refine the ends of every supported arc by bisection on the support indicator
    nxt = np.roll(np.arange(len(scan)), -1)
    flips = np.flatnonzero(inside != inside[nxt])
    lo = scan[flips]
    hi = scan[nxt[flips]] + np.where(nxt[flips] == 0, 2.0 * np.pi, 0.0)
    lo_in = inside[flips]
    for _ in range(BISECTIONS):
        mid = 0.5 * (lo + hi)
        same = _supported(body, A, v, r, _unit_dirs(mid)) == lo_in
        lo, hi = np.where(same, mid, lo), np.where(same, hi, mid)
    ends = np.mod(0.5 * (lo + hi), 2.0 * np.pi)

    cuts = np.unique(np.concatenate([ends, kinks]))
    if len(cuts) == 0:
        return circle_rule(n_ang)

    starts = cuts
    stops = np.append(cuts[1:], cuts[0] + 2.0 * np.pi)
    keep = _supported(body, A, v, r, _unit_dirs(0.5 * (starts + stops)))
    extra = max(1, n_ang // 128)
    thetas, weights = [], []
    for a, b in zip(starts[keep], stops[keep]):
        count = int(np.ceil((b - a) * n_ang / (2.0 * np.pi * order))) + extra
        t, w = _panels(a, b, count, order)
        thetas.append(t)
        weights.append(w)
    theta = np.concatenate(thetas)
    return _unit_dirs(theta), np.concatenate(weights)


def angular_rule(body: ConvexBody, A: np.ndarray, v: np.ndarray, r: float, n_ang: int,
                 order: int = 8) -> Tuple[np.ndarray, np.ndarray]:
    if body.dim == 2:
        return planar_rule(body, A, v, r, n_ang, order)
    return sphere_nodes(body.dim, n_ang)


@dataclass(frozen=True, eq=False)
class ShellGrid:
    """Nodes x with y = A x + v and |y| > r, their g_r(||x||_K) values and weights (Jacobian included)."""
    r: float
    x: np.ndarray
    y: np.ndarray
    g: np.ndarray
    w: np.ndarray
    n_ang: int

    @property
    def size(self) -> int:
        return len(self.w)

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """sum_j w_j g_j values_j, over the leading axis of values."""
        return np.tensordot(self.w * self.g, values, axes=(0, 0))


def _radial_nodes(body: ConvexBody, A: np.ndarray, v: np.ndarray, r: float, order: int,
                  dirs: np.ndarray, wang: np.ndarray):
    n = body.dim
    k = np.asarray(body.gauge(dirs))
    a = dirs @ A.T
    rho1, rho2 = r / k, (2.0 - r) / k

    qa = np.einsum("ij,ij->i", a, a)
    qb = a @ v
    qc = float(v @ v) - r * r
    disc = qb * qb - qa * qc
    sq = np.sqrt(np.clip(disc, 0.0, None))
    has = disc > 0
    roots = np.where(has[:, None], np.column_stack([(-qb - sq) / qa, (-qb + sq) / qa]), 0.0)

    bps = np.column_stack([np.zeros_like(k), rho1, rho2, roots])
    bps = np.sort(np.clip(bps, 0.0, rho2[:, None]), axis=1)
    lo, hi = bps[:, :-1], bps[:, 1:]
    t, wt = gauss_legendre(order)
    half = (hi - lo)[:, :, None] / 2.0
    rho = (lo[:, :, None] + half * (t + 1.0)).reshape(len(k), -1)
    wr = (half * wt).reshape(len(k), -1)

    x = rho[:, :, None] * dirs[:, None, :]
    y = x @ A.T + v
    s = np.linalg.norm(y, axis=-1)
    w = wang[:, None] * wr * rho ** (n - 1)
    gr = np.clip((2.0 - r - rho * k[:, None]) / (2.0 * (1.0 - r)), 0.0, 1.0)
    mask = (s > r) & (w > 0) & (gr > 0)
    return x[mask], y[mask], gr[mask], w[mask]


def shell_grid(body: ConvexBody, r: float, A: np.ndarray, v: np.ndarray, n_ang: int,
               cfg: QuadratureConfig) -> ShellGrid:
    A = np.asarray(A, dtype=float)
    v = np.asarray(v, dtype=float).reshape(-1)
    dirs, wang = angular_rule(body, A, v, r, n_ang, cfg.angular_order)
    n = body.dim
    if len(dirs) == 0:
        return ShellGrid(r, np.zeros((0, n)), np.zeros((0, n)), np.zeros(0), np.zeros(0), n_ang)
    work = threads()
    chunks = [(dirs[i:i + CHUNK], wang[i:i + CHUNK]) for i in range(0, len(dirs), CHUNK)]
    job = lambda c: _radial_nodes(body, A, v, r, cfg.radial_order, *c)
    if work > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=work) as pool:
            parts = list(pool.map(job, chunks))
    else:
        parts = [job(c) for c in chunks]
    x, y, g, w = (np.concatenate([p[i] for p in parts]) for i in range(4))
    return ShellGrid(r, x.reshape(-1, n), y.reshape(-1, n), g, w, n_ang)


@dataclass(frozen=True)
class Estimate:
    value: np.ndarray
    error: float
    n_ang: int

    def __float__(self) -> float:
        return float(self.value)


def refine(evaluate: Callable[[int], np.ndarray], cfg: QuadratureConfig) -> Estimate:
    """Double the angular resolution until two successive results agree within cfg.tol."""
    n_ang, prev = cfg.n_ang, None
    while n_ang <= cfg.max_ang:
        val = np.asarray(evaluate(n_ang), dtype=float)
        if prev is not None:
            err = float(np.max(np.abs(val - prev)))
            if err <= cfg.tol * max(1.0, float(np.max(np.abs(val)))):
                return Estimate(val, err, n_ang)
        prev = val
        n_ang *= 2
    raise QuadratureBudgetExceeded(f"no agreement within {cfg.tol:g} up to {cfg.max_ang} angular nodes")
