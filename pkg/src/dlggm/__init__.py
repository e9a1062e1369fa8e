"""Sparse precision-matrix estimation with a Dirichlet-Laplace shrinkage prior."""

__version__ = "0.1.0"

from .core import (EdgeIndex, NotPositiveDefiniteError, PrecisionMatrix, ScatterMatrix,
                   SymMatrix, cholesky, edge_index, edge_pair, log_det_pd)
from .distributions import RngStream
from .gibbs import ChainConfig, PosteriorSamples, run_chain, run_chains, sweep
from .graph import EdgeSet, default_delta, inclusion, recovery_metrics, select_graph
from .model import HyperParams, LatentState, ModelState
