"""Graph selection from posterior draws by thresholding |omega_ij|."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import edge_index, edge_pair, edge_rows_cols, n_edges


@dataclass(frozen=True)
class EdgeSet:
    """Undirected edges as 1-based pairs (i, j) with i < j."""

    p: int
    edges: frozenset

    def __post_init__(self):
        edges = frozenset((int(i), int(j)) for i, j in self.edges)
        for i, j in edges:
            edge_index(i, j, self.p)  # validates
        object.__setattr__(self, "edges", edges)

    def __len__(self) -> int:
        return len(self.edges)

    def __contains__(self, pair) -> bool:
        return tuple(pair) in self.edges

    def sorted(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def mask(self) -> np.ndarray:
        """Boolean vector over edges in canonical order."""
        out = np.zeros(n_edges(self.p), dtype=bool)
        for i, j in self.edges:
            out[edge_index(i, j, self.p).flat] = True
        return out

    @classmethod
    def from_mask(cls, p: int, mask) -> "EdgeSet":
        flats = np.flatnonzero(np.asarray(mask, dtype=bool))
        return cls(p, frozenset((e.i, e.j) for e in (edge_pair(int(f), p) for f in flats)))


def _offdiag(omega) -> np.ndarray:
    a = omega.dense() if hasattr(omega, "dense") else np.asarray(omega, dtype=float)
    return a[edge_rows_cols(a.shape[0])]


def support_threshold(omega, delta: float) -> EdgeSet:
    """Edges with |omega_ij| > delta."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    a = omega.dense() if hasattr(omega, "dense") else np.asarray(omega, dtype=float)
    return EdgeSet.from_mask(a.shape[0], np.abs(_offdiag(a)) > delta)


def default_delta(p: int, s_guess: int) -> float:
    """Threshold s / p^2 for a guessed number of edges s."""
    if s_guess < 1:
        raise ValueError("s_guess must be >= 1")
    return s_guess / p**2


@dataclass(frozen=True)
class InclusionMatrix:
    """Per-edge fraction of draws with |omega_e| > delta (canonical order)."""

    p: int
    freq: np.ndarray
    n_draws: int = 1

    def dense(self) -> np.ndarray:
        out = np.zeros((self.p, self.p))
        r, c = edge_rows_cols(self.p)
        out[r, c] = out[c, r] = self.freq
        return out

    def merge(self, other: "InclusionMatrix") -> "InclusionMatrix":
        if other.p != self.p:
            raise ValueError("dimension mismatch")
        n = self.n_draws + other.n_draws
        return InclusionMatrix(self.p, (self.freq * self.n_draws + other.freq * other.n_draws) / n, n)


def inclusion(samples, delta: float) -> InclusionMatrix:
    """Fraction of stored draws exceeding delta in absolute value, per edge.

    ``samples`` is a PosteriorSamples or an array of shape (k, p, p).
    """
    draws = samples.draws if hasattr(samples, "draws") else np.asarray(samples, dtype=float)
    if draws.ndim != 3 or draws.shape[0] == 0:
        raise ValueError("need at least one stored draw")
    p = draws.shape[1]
    r, c = edge_rows_cols(p)
    hits = np.abs(draws[:, r, c]) > delta
    return InclusionMatrix(p, hits.mean(axis=0), draws.shape[0])


def select_graph(incl: InclusionMatrix, cutoff: float = 0.5) -> EdgeSet:
    if not 0 < cutoff < 1:
        raise ValueError("cutoff must lie in (0, 1)")
    return EdgeSet.from_mask(incl.p, incl.freq > cutoff)


@dataclass(frozen=True)
class RecoveryMetrics:
    tpr: float
    fpr: float
    mcc: float
    tp: int
    fp: int
    tn: int
    fn: int


def recovery_metrics(est: EdgeSet, truth: EdgeSet) -> RecoveryMetrics:
    """Confusion-matrix rates over all candidate edges.

    Conventions for empty denominators: tpr = 1 when truth is empty, fpr = 0
    when truth is complete, mcc = 0 whenever a factor of its denominator is 0.
    """
    if est.p != truth.p:
        raise ValueError(f"dimension mismatch: {est.p} vs {truth.p}")
    e, t = est.mask(), truth.mask()
    tp = int(np.sum(e & t))
    fp = int(np.sum(e & ~t))
    fn = int(np.sum(~e & t))
    tn = int(np.sum(~e & ~t))
    tpr = tp / (tp + fn) if tp + fn else 1.0
    fpr = fp / (fp + tn) if fp + tn else 0.0
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    mcc = (tp * tn - fp * fn) / math.sqrt(denom) if denom else 0.0
    return RecoveryMetrics(tpr, fpr, mcc, tp, fp, tn, fn)
