"""Symmetric matrices, the traceless subspace sym0 and the flat chart of sym0 x R^n.

The chart identifies (M, w) in sym0 x R^n with a vector of length n(n+3)/2 - 1:
first the Frobenius coordinates of M in the orthonormal basis returned by
``basis_sym0``, then w unchanged. Both maps are linear isometries.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import List, Union

import numpy as np

from .config import SYM_TOL
from .errors import ChartLengthError, DimensionMismatch, SymmetryViolation, TraceViolation

MAX_DIM = 16

ArrayLike = Union[np.ndarray, "SymMatrix", list]


def sym0_dim(n: int) -> int:
    return n * (n + 1) // 2 - 1


def chart_dim(n: int) -> int:
    return n * (n + 3) // 2 - 1


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class SymMatrix:
    """Dense symmetric n x n matrix, n >= 2.

    Entries off from symmetry by more than SYM_TOL are rejected; entries within
    the band are averaged so that entries[i, j] == entries[j, i] holds exactly.
    """
    entries: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"expected a square matrix, got shape {a.shape}")
        if a.shape[0] < 2:
            raise DimensionMismatch("symmetric matrices need dim >= 2")
        if not np.all(np.isfinite(a)):
            raise SymmetryViolation("matrix has non-finite entries")
        asym = np.max(np.abs(a - a.T))
        if asym > SYM_TOL:
            raise SymmetryViolation(f"matrix is not symmetric (max |A - A^T| = {asym:.3e})")
        object.__setattr__(self, "entries", _frozen(0.5 * (a + a.T)))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries))

    def __array__(self, dtype=None, copy=None):
        return np.array(self.entries, dtype=dtype)

    @classmethod
    def identity(cls, n: int) -> "SymMatrix":
        return cls(np.eye(n))

    @classmethod
    def zeros(cls, n: int) -> "SymMatrix":
        return cls(np.zeros((n, n)))

    def traceless(self) -> "SymMatrix":
        """Orthogonal projection onto sym0."""
        n = self.dim
        return SymMatrix(self.entries - (self.trace / n) * np.eye(n))


def as_array(A: ArrayLike) -> np.ndarray:
    if isinstance(A, SymMatrix):
        return A.entries
    return np.asarray(A, dtype=float)


@dataclass(frozen=True, eq=False)
class SymPair:
    """A point (M, w) of sym x R^n with the product inner product <A,B> + <v,w>."""
    M: SymMatrix
    w: np.ndarray

    def __post_init__(self):
        M = self.M if isinstance(self.M, SymMatrix) else SymMatrix(self.M)
        w = np.asarray(self.w, dtype=float).reshape(-1)
        if w.shape[0] != M.dim:
            raise DimensionMismatch(f"vector of length {w.shape[0]} for a {M.dim}x{M.dim} matrix")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "w", _frozen(w))

    @property
    def n(self) -> int:
        return self.M.dim

    @classmethod
    def zeros(cls, n: int) -> "SymPair":
        return cls(SymMatrix.zeros(n), np.zeros(n))

    def inner(self, other: "SymPair") -> float:
        return frobenius(self.M, other.M) + float(np.dot(self.w, other.w))

    def norm(self) -> float:
        return float(np.sqrt(self.inner(self)))

    def traceless(self) -> "SymPair":
        return SymPair(self.M.traceless(), self.w)

    def __add__(self, other: "SymPair") -> "SymPair":
        return SymPair(SymMatrix(self.M.entries + other.M.entries), self.w + other.w)

    def __sub__(self, other: "SymPair") -> "SymPair":
        return SymPair(SymMatrix(self.M.entries - other.M.entries), self.w - other.w)

    def __mul__(self, t: float) -> "SymPair":
        return SymPair(SymMatrix(t * self.M.entries), t * self.w)

    __rmul__ = __mul__

    def __neg__(self) -> "SymPair":
        return self * -1.0


def frobenius(A: ArrayLike, B: ArrayLike) -> float:
    """<A, B> = tr(A^T B) = sum_ij A_ij B_ij."""
    a, b = as_array(A), as_array(B)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape} differ")
    return float(np.sum(a * b))


@lru_cache(maxsize=None)
def basis_stack(n: int) -> np.ndarray:
    if n < 2 or n > MAX_DIM:
        raise DimensionMismatch(f"n must lie in [2, {MAX_DIM}], got {n}")
    mats: List[np.ndarray] = []

    # diagonal part: Gram-Schmidt on (e_ii - e_{i+1,i+1}) / sqrt(2)
    diag_basis: List[np.ndarray] = []
    for i in range(n - 1):
        d = np.zeros(n)
        d[i], d[i + 1] = 1.0, -1.0
        d /= np.sqrt(2.0)
        for q in diag_basis:
            d = d - np.dot(q, d) * q
        d /= np.linalg.norm(d)
        diag_basis.append(d)
    mats.extend(np.diag(d) for d in diag_basis)

    # off-diagonal part: (e_ij + e_ji) / sqrt(2)
    for i in range(n):
        for j in range(i + 1, n):
            E = np.zeros((n, n))
            E[i, j] = E[j, i] = 1.0 / np.sqrt(2.0)
            mats.append(E)

    stack = np.array(mats)
    stack.flags.writeable = False
    return stack


def basis_sym0(n: int) -> List[SymMatrix]:
    """Frobenius-orthonormal basis of {M in sym : tr M = 0}, of length n(n+1)/2 - 1."""
    return [SymMatrix(B) for B in basis_stack(n)]


@lru_cache(maxsize=None)
def chart_matrix(n: int) -> np.ndarray:
    """(n*n, n(n+1)/2 - 1) matrix whose columns are the flattened basis of sym0."""
    C = basis_stack(n).reshape(sym0_dim(n), n * n).T.copy()
    C.flags.writeable = False
    return C


def matrix_to_coords(M: ArrayLike) -> np.ndarray:
    """sym0 coordinates of the traceless part of M."""
    a = as_array(M)
    n = a.shape[0]
    return a.reshape(-1) @ chart_matrix(n)


def coords_to_matrix(x: np.ndarray, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != sym0_dim(n):
        raise ChartLengthError(f"expected {sym0_dim(n)} sym0 coordinates, got {x.shape[0]}")
    M = (chart_matrix(n) @ x).reshape(n, n)
    M = 0.5 * (M + M.T)
    return M - (np.trace(M) / n) * np.eye(n)


def pair_to_coords(p: SymPair) -> np.ndarray:
    """Flat chart coordinates of a pair whose matrix part is traceless."""
    if abs(p.M.trace) > SYM_TOL:
        raise TraceViolation(f"tr(M) = {p.M.trace:.3e} exceeds {SYM_TOL:g}")
    return np.concatenate([matrix_to_coords(p.M), p.w])


def coords_to_pair(x: np.ndarray, n: int) -> SymPair:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != chart_dim(n):
        raise ChartLengthError(f"expected {chart_dim(n)} coordinates for n={n}, got {x.shape[0]}")
    k = sym0_dim(n)
    return SymPair(SymMatrix(coords_to_matrix(x[:k], n)), x[k:])
