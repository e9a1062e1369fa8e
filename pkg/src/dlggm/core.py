"""Symmetric-matrix storage, edge-pair indexing and Cholesky helpers.

Node labels are 1-based throughout the public API (edge (1, 2) is the first
pair); arrays are 0-based internally.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

PIVOT_RTOL = 1e-12


class NotPositiveDefiniteError(ValueError):
    """Raised when a matrix that must be positive definite is not.

    The offending matrix is kept on ``.matrix`` for debugging.
    """

    def __init__(self, message: str, matrix: np.ndarray | None = None):
        super().__init__(message)
        self.matrix = matrix


def n_edges(p: int) -> int:
    return p * (p - 1) // 2


@dataclass(frozen=True)
class EdgeIndex:
    i: int
    j: int
    flat: int


def edge_index(i: int, j: int, p: int) -> EdgeIndex:
    """Canonical flat position of the pair (i, j), 1 <= i < j <= p.

    Pairs are ordered row-major over the upper triangle:
    (1,2), (1,3), ..., (1,p), (2,3), ...
    """
    if not (1 <= i < j <= p):
        raise ValueError(f"edge ({i}, {j}) invalid for p={p}: need 1 <= i < j <= p")
    r, c = i - 1, j - 1
    flat = r * p - r * (r + 1) // 2 + (c - r - 1)
    return EdgeIndex(i, j, flat)


def edge_pair(flat: int, p: int) -> EdgeIndex:
    """Inverse of :func:`edge_index`."""
    m = n_edges(p)
    if not (0 <= flat < m):
        raise ValueError(f"flat index {flat} out of range [0, {m})")
    # rows remaining after the pair, counted from the end of the triangle
    k = m - 1 - flat
    q = int((np.sqrt(8 * k + 1) - 1) // 2)
    while (q + 1) * (q + 2) // 2 <= k:
        q += 1
    while q * (q + 1) // 2 > k:
        q -= 1
    r = p - 2 - q
    c = flat - (r * p - r * (r + 1) // 2) + r + 1
    return EdgeIndex(r + 1, c + 1, flat)


@lru_cache(maxsize=64)
def _triu(p: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    r, c = np.triu_indices(p, k=k)
    r.setflags(write=False)
    c.setflags(write=False)
    return r, c


def edge_rows_cols(p: int) -> tuple[np.ndarray, np.ndarray]:
    """0-based (row, col) arrays of all pairs in canonical order."""
    return _triu(p, 1)


class SymMatrix:
    """Symmetric p x p matrix held as a packed upper triangle (diagonal included).

    There is one storage cell per unordered pair, so symmetry cannot be broken.
    """

    __slots__ = ("_dim", "_packed")

    def __init__(self, dim: int, packed):
        if dim < 2:
            raise ValueError(f"dimension must be >= 2, got {dim}")
        packed = np.array(packed, dtype=float)
        if packed.shape != (dim * (dim + 1) // 2,):
            raise ValueError(f"packed storage for dim={dim} needs {dim * (dim + 1) // 2} values")
        packed.setflags(write=False)
        self._dim = dim
        self._packed = packed

    @classmethod
    def from_dense(cls, a, *, atol: float = 0.0) -> "SymMatrix":
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        if not np.allclose(a, a.T, rtol=0.0, atol=atol):
            raise ValueError("matrix is not symmetric")
        p = a.shape[0]
        return cls(p, a[_triu(p, 0)])

    @classmethod
    def identity(cls, p: int) -> "SymMatrix":
        return cls.from_dense(np.eye(p))

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def packed(self) -> np.ndarray:
        return self._packed

    def entry(self, i: int, j: int) -> float:
        """Entry at 1-based (i, j)."""
        p = self._dim
        if not (1 <= i <= p and 1 <= j <= p):
            raise IndexError(f"({i}, {j}) outside a {p}x{p} matrix")
        r, c = min(i, j) - 1, max(i, j) - 1
        return float(self._packed[r * p - r * (r - 1) // 2 + (c - r)])

    def dense(self) -> np.ndarray:
        p = self._dim
        out = np.empty((p, p))
        iu = _triu(p, 0)
        out[iu] = self._packed
        out[(iu[1], iu[0])] = self._packed
        return out

    def offdiag(self) -> np.ndarray:
        """Off-diagonal values in canonical edge order."""
        return self.dense()[edge_rows_cols(self._dim)]

    def diagonal(self) -> np.ndarray:
        return np.diag(self.dense())

    def __eq__(self, other) -> bool:
        if not isinstance(other, SymMatrix):
            return NotImplemented
        return self._dim == other._dim and np.array_equal(self._packed, other._packed)

    def __repr__(self) -> str:
        return f"SymMatrix(dim={self._dim})"


def cholesky(m) -> np.ndarray | None:
    """Lower Cholesky factor of a symmetric matrix, or ``None`` if not PD.

    A pivot counts as failed when it is <= 1e-12 times the largest diagonal
    entry. Accepts a :class:`SymMatrix` or a dense symmetric array.
    """
    a = m.dense() if isinstance(m, SymMatrix) else np.asarray(m, dtype=float)
    d = np.diag(a)
    if d.size == 0 or not np.all(np.isfinite(a)):
        return None
    tol = PIVOT_RTOL * max(float(d.max()), 0.0)
    if d.max() <= 0:
        return None
    try:
        L = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        return None
    if np.any(np.diag(L) ** 2 <= tol) or not np.all(np.isfinite(L)):
        return None
    return L


def is_pd(m) -> bool:
    return cholesky(m) is not None


@dataclass(frozen=True)
class PrecisionMatrix:
    """Positive-definite symmetric matrix; the object being estimated."""

    matrix: SymMatrix

    def __post_init__(self):
        if np.any(self.matrix.diagonal() <= 0) or cholesky(self.matrix) is None:
            raise NotPositiveDefiniteError("precision matrix is not positive definite",
                                           self.matrix.dense())

    @classmethod
    def from_dense(cls, a) -> "PrecisionMatrix":
        a = np.asarray(a, dtype=float)
        return cls(SymMatrix.from_dense(a, atol=1e-12 * max(1.0, np.abs(a).max())))

    @classmethod
    def identity(cls, p: int) -> "PrecisionMatrix":
        return cls(SymMatrix.identity(p))

    @property
    def dim(self) -> int:
        return self.matrix.dim

    def dense(self) -> np.ndarray:
        return self.matrix.dense()


@dataclass(frozen=True)
class ScatterMatrix:
    """S = X^T X over n (centered) observations."""

    matrix: SymMatrix
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"sample count must be positive, got {self.n}")
        a = self.matrix.dense()
        if np.any(np.diag(a) < 0):
            raise ValueError("scatter matrix has a negative diagonal entry")
        # PSD check: eigenvalues nonnegative up to a scale-relative tolerance
        scale = max(float(np.abs(a).max()), 1.0)
        if np.linalg.eigvalsh(a).min() < -1e-10 * scale:
            raise ValueError("scatter matrix is not positive semi-definite")

    @classmethod
    def from_data(cls, x) -> "ScatterMatrix":
        x = np.asarray(x, dtype=float)
        s = x.T @ x
        return cls(SymMatrix.from_dense((s + s.T) / 2), x.shape[0])

    @property
    def dim(self) -> int:
        return self.matrix.dim

    def dense(self) -> np.ndarray:
        return self.matrix.dense()


def log_det_pd(m) -> float:
    """log det of a PD matrix from its Cholesky diagonal."""
    a = m.dense() if hasattr(m, "dense") else np.asarray(m, dtype=float)
    L = cholesky(a)
    if L is None:
        raise NotPositiveDefiniteError("log-determinant needs a positive-definite matrix", a)
    return 2.0 * float(np.sum(np.log(np.diag(L))))
