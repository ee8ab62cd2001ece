"""Fixture bodies: regular polygons, regular simplices, cross-polytopes."""
from __future__ import annotations

import numpy as np

from .body import HPolytope, VPolytope


def regular_polygon(m: int, radius: float = 1.0, phase: float = 0.0) -> VPolytope:
    """Regular m-gon inscribed in the circle of the given radius."""
    t = phase + 2.0 * np.pi * np.arange(m) / m
    return VPolytope(radius * np.column_stack([np.cos(t), np.sin(t)]))


def simplex_vertices(n: int) -> np.ndarray:
    """n+1 unit vectors with pairwise inner product -1/n (centered regular simplex)."""
    E = np.eye(n + 1) - 1.0 / (n + 1)
    # orthonormal basis of the hyperplane sum(x) = 0
    Q, _ = np.linalg.qr(E[:, :n])
    P = E @ Q
    return P / np.linalg.norm(P, axis=1, keepdims=True)


def regular_simplex(n: int) -> HPolytope:
    """Regular simplex with vertices on the unit sphere; facet opposite p_i is <-p_i, x> <= 1/n."""
    P = simplex_vertices(n)
    return HPolytope(-P, np.full(n + 1, 1.0 / n))


def cross_polytope(n: int) -> HPolytope:
    """conv{+-e_i}: facets <s, x> <= 1 over all sign vectors s, normalized."""
    signs = np.array(np.meshgrid(*[[-1.0, 1.0]] * n, indexing="ij")).reshape(n, -1).T
    return HPolytope(signs / np.sqrt(n), np.full(len(signs), 1.0 / np.sqrt(n)))


def cross_polytope_vertices(n: int) -> np.ndarray:
    return np.vstack([np.eye(n), -np.eye(n)])
