"""Sparse ground-truth precision matrices and Gaussian data drawn from them."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import PrecisionMatrix, SymMatrix, cholesky, edge_pair, edge_rows_cols, n_edges
from .distributions import RngStream
from .graph import EdgeSet

MAX_BOOST_DOUBLINGS = 50


@dataclass(frozen=True)
class TruthSpec:
    """Ground-truth recipe.

    ``structure="banded"``: unit diagonal, ``value`` on the first ``bandwidth``
    off-diagonals. ``structure="random"``: ``n_edges`` pairs chosen uniformly,
    magnitudes uniform on +-[lo, hi], diagonal = row sum of |off-diagonals| +
    ``diag_boost``.
    """

    p: int
    structure: str = "random"
    bandwidth: int = 1
    value: float = 0.5
    n_edges: int = 0
    magnitude: tuple[float, float] = (0.3, 0.7)
    diag_boost: float = 0.5

    def __post_init__(self):
        if self.p < 2:
            raise ValueError("p must be >= 2")
        if self.structure not in ("banded", "random"):
            raise ValueError(f"unknown structure {self.structure!r}")
        if self.structure == "banded" and not 0 <= self.bandwidth < self.p:
            raise ValueError("bandwidth must be in [0, p)")
        if not 0 <= self.n_edges <= n_edges(self.p):
            raise ValueError(f"n_edges must be in [0, {n_edges(self.p)}]")
        lo, hi = self.magnitude
        if not 0 < lo <= hi:
            raise ValueError("magnitude range must satisfy 0 < lo <= hi")
        if self.diag_boost < 0:
            raise ValueError("diag_boost must be >= 0")


def _make_pd(base: np.ndarray, boost: float) -> np.ndarray:
    if cholesky(base) is not None:
        return base
    extra = boost if boost > 0 else 1e-3
    for _ in range(MAX_BOOST_DOUBLINGS):
        cand = base + extra * np.eye(base.shape[0])
        if cholesky(cand) is not None:
            return cand
        extra *= 2.0
    raise ValueError("could not make the truth matrix positive definite")


def gen_precision(spec: TruthSpec, rng: RngStream) -> tuple[PrecisionMatrix, EdgeSet]:
    p = spec.p
    om = np.zeros((p, p))
    if spec.structure == "banded":
        for k in range(1, spec.bandwidth + 1):
            idx = np.arange(p - k)
            om[idx, idx + k] = om[idx + k, idx] = spec.value
        np.fill_diagonal(om, 1.0 + spec.diag_boost)
        om = _make_pd(om, spec.diag_boost)
    else:
        flats = np.sort(rng.gen.choice(n_edges(p), size=spec.n_edges, replace=False))
        r, c = edge_rows_cols(p)
        lo, hi = spec.magnitude
        mags = rng.gen.uniform(lo, hi, size=flats.size)
        signs = np.where(rng.uniform(flats.size) < 0.5, -1.0, 1.0)
        om[r[flats], c[flats]] = om[c[flats], r[flats]] = mags * signs
        np.fill_diagonal(om, np.abs(om).sum(axis=1) + spec.diag_boost)
        om = _make_pd(om, spec.diag_boost)
    r, c = edge_rows_cols(p)
    support = np.flatnonzero(om[r, c] != 0)
    edges = EdgeSet(p, frozenset((e.i, e.j) for e in (edge_pair(int(f), p) for f in support)))
    return PrecisionMatrix(SymMatrix.from_dense(om)), edges


def gen_data(omega: PrecisionMatrix, n: int, rng: RngStream) -> np.ndarray:
    """n iid rows from N(0, Omega^-1), via the Cholesky factor of Sigma."""
    if n < 2:
        raise ValueError("n must be >= 2")
    sigma = np.linalg.inv(omega.dense())
    L = cholesky(0.5 * (sigma + sigma.T))
    z = rng.standard_normal((n, omega.dim))
    return z @ L.T
