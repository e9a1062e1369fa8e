"""Dirichlet-Laplace shrinkage model on the off-diagonal precision entries.

Each edge e = (i, j), i < j, has prior variance psi_e * phi_e**2 * tau**2 with

    psi_e ~ Exp(1/2),  phi ~ Dirichlet(a, ..., a),  tau ~ Gamma(nu * a, 1/2),

where nu = p (p - 1) / 2. Diagonal entries carry a flat prior on (0, inf).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .core import (EdgeIndex, PrecisionMatrix, ScatterMatrix, edge_rows_cols, log_det_pd,
                   n_edges)
from .distributions import (RngStream, sample_dirichlet, sample_exponential, sample_gamma)

# cap on 1 / (edge variance); keeps column precisions finite when phi collapses
MAX_EDGE_PRECISION = 1e280

A_PRESETS = ("inv_p2", "inv_nu")


@dataclass(frozen=True)
class HyperParams:
    a: float
    nu: int
    omega_floor: float = 1e-10

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"Dirichlet concentration must be positive, got {self.a}")
        if self.nu < 1:
            raise ValueError(f"nu must be >= 1, got {self.nu}")
        if not self.omega_floor > 0:
            raise ValueError("omega_floor must be positive")

    @property
    def p(self) -> int:
        return int(round((1 + math.sqrt(1 + 8 * self.nu)) / 2))

    @classmethod
    def for_dim(cls, p: int, a: float | None = None, preset: str = "inv_p2",
                omega_floor: float = 1e-10) -> "HyperParams":
        """Hyperparameters for dimension p; ``a`` defaults to 1/p^2 or, with
        ``preset="inv_nu"``, to 1/nu."""
        nu = n_edges(p)
        if a is None:
            if preset == "inv_p2":
                a = 1.0 / p**2
            elif preset == "inv_nu":
                a = 1.0 / nu
            else:
                raise ValueError(f"unknown preset {preset!r}; choose from {A_PRESETS}")
        return cls(a=float(a), nu=nu, omega_floor=omega_floor)


@dataclass(frozen=True)
class LatentState:
    psi: np.ndarray
    phi: np.ndarray
    tau: float

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=float)
        phi = np.asarray(self.phi, dtype=float)
        if psi.shape != phi.shape or psi.ndim != 1:
            raise ValueError("psi and phi must be vectors of equal length")
        if np.any(~(psi > 0)) or not np.all(np.isfinite(psi)):
            raise ValueError("psi must be positive and finite")
        if np.any(~(phi > 0)) or abs(phi.sum() - 1.0) > 1e-12:
            raise ValueError("phi must lie in the open simplex")
        if not (self.tau > 0 and np.isfinite(self.tau)):
            raise ValueError("tau must be positive and finite")
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "tau", float(self.tau))

    @classmethod
    def initial(cls, nu: int) -> "LatentState":
        return cls(np.ones(nu), np.full(nu, 1.0 / nu), 1.0)

    def log_scales(self) -> np.ndarray:
        """log of psi_e * phi_e^2 * tau^2 for every edge."""
        return np.log(self.psi) + 2.0 * np.log(self.phi) + 2.0 * math.log(self.tau)

    def scales(self) -> np.ndarray:
        return np.exp(self.log_scales())

    def precisions(self) -> np.ndarray:
        return np.minimum(np.exp(-self.log_scales()), MAX_EDGE_PRECISION)


@dataclass(frozen=True)
class ModelState:
    omega: PrecisionMatrix
    latent: LatentState

    def __post_init__(self):
        if self.latent.psi.size != n_edges(self.omega.dim):
            raise ValueError("latent state size does not match the precision matrix")


def edge_scale(state: ModelState, e: EdgeIndex) -> float:
    """Full prior variance psi_e phi_e^2 tau^2 of edge e."""
    lat = state.latent
    return float(lat.psi[e.flat] * lat.phi[e.flat] ** 2 * lat.tau**2)


def log_unnorm_posterior(state: ModelState, S: ScatterMatrix) -> float:
    """(n/2) log det(Omega) - tr(S Omega)/2 - sum_e omega_e^2 / (2 scale_e)."""
    om = state.omega.dense()
    if S.dim != om.shape[0]:
        raise ValueError("scatter and precision dimensions differ")
    logdet = log_det_pd(om)
    trace = float(np.sum(S.dense() * om))
    w = om[edge_rows_cols(om.shape[0])]
    with np.errstate(divide="ignore"):
        penalty = np.exp(2.0 * np.log(np.abs(w)) - state.latent.log_scales() - math.log(2.0))
    return 0.5 * S.n * logdet - 0.5 * trace - float(penalty.sum())


@dataclass(frozen=True)
class PriorDraws:
    """Batched prior draws; edge arrays have shape (n_draws, nu)."""

    omega: np.ndarray
    psi: np.ndarray
    phi: np.ndarray
    tau: np.ndarray


def sample_prior_batch(rng: RngStream, p: int, hp: HyperParams, n_draws: int) -> PriorDraws:
    if p < 2:
        raise ValueError("p must be >= 2")
    nu = n_edges(p)
    tau = sample_gamma(rng, nu * hp.a, 0.5, size=n_draws)
    phi = sample_dirichlet(rng, np.full(nu, hp.a), size=n_draws)
    psi = sample_exponential(rng, 0.5, size=(n_draws, nu))
    z = rng.standard_normal((n_draws, nu))
    omega = np.sqrt(psi) * phi * tau[:, None] * z
    return PriorDraws(omega, psi, phi, tau)


def sample_prior(rng: RngStream, p: int, hp: HyperParams) -> tuple[np.ndarray, LatentState]:
    """One draw of the off-diagonal values and latents. Diagonals are not drawn."""
    d = sample_prior_batch(rng, p, hp, 1)
    return d.omega[0], LatentState(d.psi[0], d.phi[0], float(d.tau[0]))


@dataclass
class ConcentrationResult:
    p: int
    a: float
    deltas: np.ndarray
    prob_small: np.ndarray
    constants: np.ndarray
    constant: float
    spread: float
    skipped: list = field(default_factory=list)

    @property
    def stable(self) -> bool:
        return bool(np.isfinite(self.constant) and self.constant > 0 and self.spread <= 2.0)


def prior_concentration_check(rng: RngStream, p: int, hp: HyperParams, deltas,
                              n_draws: int = 10**6) -> ConcentrationResult:
    """Monte Carlo check of P(|w| < d) >= 1 - C log(1/d) / Gamma(a).

    For every d the implied constant C(d) = (1 - P) Gamma(a) / log(1/d) is
    computed; the fitted C is the largest, ``spread`` is max/min over the grid.
    Values of d above 0.9 are skipped because the bound degenerates as d -> 1.
    """
    deltas = np.asarray(deltas, dtype=float)
    if np.any((deltas <= 0) | (deltas >= 1)):
        raise ValueError("deltas must lie in (0, 1)")
    skipped = [float(d) for d in deltas if d > 0.9]
    deltas = np.sort(deltas[deltas <= 0.9])
    nu = n_edges(p)
    draws = sample_prior_batch(rng, p, hp, -(-n_draws // nu))
    w = np.abs(draws.omega).ravel()
    prob = np.array([np.mean(w < d) for d in deltas])
    consts = (1.0 - prob) * special.gamma(hp.a) / np.log(1.0 / deltas)
    if consts.size == 0:
        return ConcentrationResult(p, hp.a, deltas, prob, consts, math.nan, math.nan, skipped)
    lo = consts.min()
    spread = consts.max() / lo if lo > 0 else math.inf
    return ConcentrationResult(p, hp.a, deltas, prob, consts, float(consts.max()), float(spread),
                               skipped)
