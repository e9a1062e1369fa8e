"""Block Gibbs sampler for the Dirichlet-Laplace precision model.

One sweep updates every column of Omega from its exact (theta, eta)
conditional, then redraws the latent block as phi | Omega, tau | phi, Omega
and psi | phi, tau, Omega.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np
from scipy import linalg

from .core import (NotPositiveDefiniteError, PrecisionMatrix, ScatterMatrix, SymMatrix,
                   cholesky, edge_rows_cols, n_edges)
from .distributions import (TINY, RngStream, sample_gamma, sample_gig,
                            sample_inverse_gaussian)
from .model import (MAX_EDGE_PRECISION, HyperParams, LatentState, ModelState,
                    log_unnorm_posterior)


class ChainError(RuntimeError):
    pass


class ConfigError(ValueError):
    pass


def edge_lookup(p: int) -> np.ndarray:
    """p x p array of flat edge indices (diagonal = -1)."""
    out = np.full((p, p), -1, dtype=np.intp)
    r, c = edge_rows_cols(p)
    flat = np.arange(r.size)
    out[r, c] = flat
    out[c, r] = flat
    return out


@dataclass(frozen=True)
class ColumnPartition:
    """Omega and S with row/column j moved last.

    ``log_lambda_col`` holds log(psi_e phi_e^2) for the edges (i, j), i != j, in
    increasing i; tau enters separately.
    """

    j: int
    rest: np.ndarray
    omega_rest: np.ndarray
    s_col: np.ndarray
    s_jj: float
    log_lambda_col: np.ndarray
    omega_rest_inv: np.ndarray | None = None

    @property
    def lambda_col(self) -> np.ndarray:
        return np.exp(self.log_lambda_col)


def _latent_log_lambda(latent: LatentState) -> np.ndarray:
    return np.log(latent.psi) + 2.0 * np.log(latent.phi)


def _partition(om, s, log_lam_edges, lookup, j0, rest_inv=None):
    rest = np.delete(np.arange(om.shape[0]), j0)
    return ColumnPartition(
        j=j0 + 1,
        rest=rest,
        omega_rest=om[np.ix_(rest, rest)],
        s_col=s[rest, j0],
        s_jj=float(s[j0, j0]),
        log_lambda_col=log_lam_edges[lookup[rest, j0]],
        omega_rest_inv=rest_inv,
    )


def make_partition(omega: PrecisionMatrix, S: ScatterMatrix, state: ModelState,
                   j: int) -> ColumnPartition:
    """Partition for 1-based column j."""
    p = omega.dim
    if not 1 <= j <= p:
        raise ValueError(f"column {j} outside 1..{p}")
    return _partition(omega.dense(), S.dense(), _latent_log_lambda(state.latent),
                      edge_lookup(p), j - 1)


class ColumnConditional(NamedTuple):
    A: np.ndarray
    mean: np.ndarray
    eta_shape: float
    eta_rate: float


def _rest_inverse(part: ColumnPartition) -> np.ndarray:
    if part.omega_rest_inv is not None:
        return part.omega_rest_inv
    return linalg.cho_solve(linalg.cho_factor(part.omega_rest, lower=True),
                            np.eye(part.omega_rest.shape[0]))


def _column_precision(part: ColumnPartition, tau: float, rest_inv: np.ndarray) -> np.ndarray:
    if part.s_jj <= 0:
        raise ValueError(f"scatter diagonal for column {part.j} must be positive")
    prior_prec = np.minimum(np.exp(-(part.log_lambda_col + 2.0 * math.log(tau))),
                            MAX_EDGE_PRECISION)
    M = part.s_jj * rest_inv
    M[np.diag_indices_from(M)] += prior_prec
    return M


def column_conditional(part: ColumnPartition, tau: float, n: int) -> ColumnConditional:
    """theta ~ N(-A s_col, A), eta ~ Gamma(n/2 + 1, s_jj/2) with
    A = (s_jj Omega_rest^-1 + diag(1 / (lambda tau^2)))^-1."""
    M = _column_precision(part, tau, _rest_inverse(part))
    cf = linalg.cho_factor(M, lower=True)
    A = linalg.cho_solve(cf, np.eye(M.shape[0]))
    A = 0.5 * (A + A.T)
    return ColumnConditional(A, -A @ part.s_col, n / 2.0 + 1.0, part.s_jj / 2.0)


def sample_column(rng: RngStream, part: ColumnPartition, tau: float, n: int,
                  rest_inv: np.ndarray | None = None) -> tuple[np.ndarray, float]:
    """Draw (theta, eta) from the column conditional.

    theta is drawn in canonical form, -M^-1 s + L^-T z with M = L L^T the
    conditional precision, which stays accurate when some prior precisions
    are enormous.
    """
    if rest_inv is None:
        rest_inv = _rest_inverse(part)
    M = _column_precision(part, tau, rest_inv)
    try:
        L = linalg.cholesky(M, lower=True)
    except linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"column {part.j} precision not PD", M) from exc
    mean = -linalg.cho_solve((L, True), part.s_col)
    z = rng.standard_normal(M.shape[0])
    theta = mean + linalg.solve_triangular(L, z, lower=True, trans="T")
    eta = sample_gamma(rng, n / 2.0 + 1.0, part.s_jj / 2.0)
    return theta, eta


def _apply_dense(om: np.ndarray, j0: int, rest: np.ndarray, theta, eta, rest_inv) -> np.ndarray:
    out = om.copy()
    out[rest, j0] = theta
    out[j0, rest] = theta
    out[j0, j0] = eta + float(theta @ rest_inv @ theta)
    return out


def apply_column(omega: PrecisionMatrix, j: int, theta, eta: float,
                 rest_inv: np.ndarray | None = None) -> PrecisionMatrix:
    """Replace column/row j (1-based) by theta and set omega_jj = eta + theta' R theta,
    R = Omega_{-j,-j}^-1."""
    if not eta > 0:
        raise ValueError("eta must be positive")
    om = omega.dense()
    j0 = j - 1
    rest = np.delete(np.arange(om.shape[0]), j0)
    if rest_inv is None:
        rest_inv = linalg.cho_solve(linalg.cho_factor(om[np.ix_(rest, rest)], lower=True),
                                    np.eye(rest.size))
    return PrecisionMatrix(SymMatrix.from_dense(
        _apply_dense(om, j0, rest, np.asarray(theta, dtype=float), eta, rest_inv)))


def rest_inverse_downdate(sigma: np.ndarray, j0: int) -> np.ndarray:
    """Omega_{-j,-j}^-1 from Sigma = Omega^-1 via the block-inverse identity."""
    rest = np.delete(np.arange(sigma.shape[0]), j0)
    s = sigma[rest, j0]
    return sigma[np.ix_(rest, rest)] - np.outer(s, s) / sigma[j0, j0]


def _sigma_after_update(rest_inv, rest, j0, theta, eta, p):
    u = rest_inv @ theta
    sigma = np.empty((p, p))
    sigma[np.ix_(rest, rest)] = rest_inv + np.outer(u, u) / eta
    sigma[rest, j0] = -u / eta
    sigma[j0, rest] = -u / eta
    sigma[j0, j0] = 1.0 / eta
    return sigma


# --- latent updates ------------------------------------------------------------

def _floored_abs(state: ModelState, hp: HyperParams) -> np.ndarray:
    return np.maximum(np.abs(state.omega.matrix.offdiag()), hp.omega_floor)


def draw_psi(rng: RngStream, abs_omega, phi, tau):
    """psi = 1 / IG(phi tau / |omega|, 1), vectorized over edges."""
    mu = np.asarray(phi) * tau / np.asarray(abs_omega)
    inv = sample_inverse_gaussian(rng, mu, 1.0, size=np.shape(mu))
    return np.clip(1.0 / inv, TINY, np.finfo(float).max)


def draw_phi(rng: RngStream, abs_omega, a: float):
    """T_e ~ GIG(a - 1, 1, 2 |omega_e|), phi = T / sum(T)."""
    t = sample_gig(rng, a - 1.0, 1.0, 2.0 * np.asarray(abs_omega), size=np.shape(abs_omega))
    phi = t / t.sum()
    phi = np.maximum(phi, TINY)
    return phi / phi.sum()


def draw_tau(rng: RngStream, abs_omega, phi, a: float) -> float:
    nu = np.size(phi)
    recip = 2.0 * float(np.sum(np.asarray(abs_omega) / np.asarray(phi)))
    return float(sample_gig(rng, nu * a - nu, 1.0, recip))


def update_psi(rng: RngStream, state: ModelState, hp: HyperParams) -> LatentState:
    lat = state.latent
    psi = draw_psi(rng, _floored_abs(state, hp), lat.phi, lat.tau)
    return replace(lat, psi=psi)


def update_phi(rng: RngStream, state: ModelState, hp: HyperParams) -> LatentState:
    return replace(state.latent, phi=draw_phi(rng, _floored_abs(state, hp), hp.a))


def update_tau(rng: RngStream, state: ModelState, hp: HyperParams) -> LatentState:
    lat = state.latent
    return replace(lat, tau=draw_tau(rng, _floored_abs(state, hp), lat.phi, hp.a))


def update_latents(rng: RngStream, state: ModelState, hp: HyperParams) -> LatentState:
    """phi | Omega, then tau | phi, Omega, then psi | phi, tau, Omega.

    phi and tau are drawn with psi (and, for phi, tau) integrated out, so psi
    has to come last for the three draws to form one exact block update.
    """
    w = _floored_abs(state, hp)
    phi = draw_phi(rng, w, hp.a)
    tau = draw_tau(rng, w, phi, hp.a)
    psi = draw_psi(rng, w, phi, tau)
    return LatentState(psi, phi, tau)


# --- sweeps and chains -----------------------------------------------------------

def sweep_columns(rng: RngStream, om: np.ndarray, s: np.ndarray, n: int,
                  latent: LatentState, order=None, inverse: str = "direct") -> np.ndarray:
    """All column updates on a dense Omega; returns the new dense matrix."""
    p = om.shape[0]
    lookup = edge_lookup(p)
    log_lam = _latent_log_lambda(latent)
    order = range(p) if order is None else order
    sigma = None
    if inverse == "downdate":
        sigma = linalg.cho_solve(linalg.cho_factor(om, lower=True), np.eye(p))
    elif inverse != "direct":
        raise ValueError(f"unknown inverse method {inverse!r}")
    for j0 in order:
        rest_inv = rest_inverse_downdate(sigma, j0) if sigma is not None else None
        part = _partition(om, s, log_lam, lookup, j0, rest_inv)
        rest_inv = _rest_inverse(part)
        theta, eta = sample_column(rng, part, latent.tau, n, rest_inv)
        om = _apply_dense(om, j0, part.rest, theta, eta, rest_inv)
        if sigma is not None:
            sigma = _sigma_after_update(rest_inv, part.rest, j0, theta, eta, p)
    return om


def sweep(rng: RngStream, state: ModelState, S: ScatterMatrix, hp: HyperParams,
          scan: str = "systematic", inverse: str = "direct") -> ModelState:
    """One full Gibbs sweep: columns 1..p (or a random permutation), then latents."""
    p = state.omega.dim
    if scan == "systematic":
        order = None
    elif scan == "random":
        order = rng.gen.permutation(p)
    else:
        raise ValueError(f"unknown scan {scan!r}")
    om = sweep_columns(rng, state.omega.dense(), S.dense(), S.n, state.latent, order, inverse)
    omega = PrecisionMatrix(SymMatrix.from_dense(om))
    mid = ModelState(omega, state.latent)
    return ModelState(omega, update_latents(rng, mid, hp))


@dataclass(frozen=True)
class ChainConfig:
    n_iter: int
    burn_in: int = 0
    thin: int = 1
    seed: int = 0
    hp: HyperParams | None = None
    init: str = "identity"
    scan: str = "systematic"
    inverse: str = "direct"

    def __post_init__(self):
        if self.n_iter < 1:
            raise ConfigError("n_iter must be >= 1")
        if not 0 <= self.burn_in < self.n_iter:
            raise ConfigError("burn_in must satisfy 0 <= burn_in < n_iter")
        if self.thin < 1:
            raise ConfigError("thin must be >= 1")
        if self.init != "identity":
            raise ConfigError(f"unknown init rule {self.init!r}")
        if self.scan not in ("systematic", "random"):
            raise ConfigError(f"unknown scan {self.scan!r}")
        if self.inverse not in ("direct", "downdate"):
            raise ConfigError(f"unknown inverse method {self.inverse!r}")

    def hyper(self, p: int) -> HyperParams:
        hp = self.hp if self.hp is not None else HyperParams.for_dim(p)
        if hp.nu != n_edges(p):
            raise ConfigError(f"hyperparameters are for nu={hp.nu}, data has p={p}")
        return hp

    def kept_sweeps(self) -> np.ndarray:
        t = np.arange(1, self.n_iter + 1)
        return t[(t > self.burn_in) & ((t - self.burn_in) % self.thin == 0)]


LATENT_TRACE_COLUMNS = ("tau", "phi_min", "phi_max", "psi_min", "psi_max")


@dataclass
class PosteriorSamples:
    """Stored draws of one chain plus per-sweep traces.

    ``draws`` has shape (k, p, p); ``log_post``, ``latent_trace`` and ``pd_ok``
    have one entry per sweep, ``kept`` lists the (1-based) sweeps stored.
    """

    draws: np.ndarray
    log_post: np.ndarray
    latent_trace: np.ndarray
    pd_ok: np.ndarray
    kept: np.ndarray
    seed: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def p(self) -> int:
        return self.draws.shape[1]

    def __len__(self) -> int:
        return self.draws.shape[0]

    def posterior_mean(self) -> np.ndarray:
        return self.draws.mean(axis=0)

    def kept_log_post(self) -> np.ndarray:
        return self.log_post[self.kept - 1]


def initial_state(p: int) -> ModelState:
    return ModelState(PrecisionMatrix.identity(p), LatentState.initial(n_edges(p)))


def _summary(state: ModelState) -> str:
    lat = state.latent
    return (f"tau={lat.tau:.3g} phi=[{lat.phi.min():.3g}, {lat.phi.max():.3g}] "
            f"psi=[{lat.psi.min():.3g}, {lat.psi.max():.3g}] "
            f"diag=[{state.omega.matrix.diagonal().min():.3g}, "
            f"{state.omega.matrix.diagonal().max():.3g}]")


def run_chain(cfg: ChainConfig, S: ScatterMatrix) -> PosteriorSamples:
    if S.n < 2:
        raise ConfigError(f"need at least 2 observations, got n={S.n}")
    p = S.dim
    if np.any(np.diag(S.dense()) <= 0):
        raise ConfigError("scatter matrix has a zero diagonal entry (constant column)")
    hp = cfg.hyper(p)
    rng = RngStream(cfg.seed)
    state = initial_state(p)
    kept = cfg.kept_sweeps()
    keep = set(kept.tolist())
    draws = np.empty((kept.size, p, p))
    log_post = np.empty(cfg.n_iter)
    lat_trace = np.empty((cfg.n_iter, len(LATENT_TRACE_COLUMNS)))
    pd_ok = np.zeros(cfg.n_iter, dtype=bool)
    k = 0
    for t in range(1, cfg.n_iter + 1):
        try:
            state = sweep(rng, state, S, hp, cfg.scan, cfg.inverse)
        except (NotPositiveDefiniteError, ValueError, FloatingPointError) as exc:
            raise ChainError(f"sweep {t} failed: {exc}; state: {_summary(state)}") from exc
        pd_ok[t - 1] = cholesky(state.omega.dense()) is not None
        if not pd_ok[t - 1]:
            raise ChainError(f"sweep {t} left Omega not positive definite; {_summary(state)}")
        log_post[t - 1] = log_unnorm_posterior(state, S)
        lat = state.latent
        lat_trace[t - 1] = (lat.tau, lat.phi.min(), lat.phi.max(), lat.psi.min(), lat.psi.max())
        if t in keep:
            draws[k] = state.omega.dense()
            k += 1
    return PosteriorSamples(draws, log_post, lat_trace, pd_ok, kept, cfg.seed,
                            {"a": hp.a, "nu": hp.nu, "n": S.n})


def _run_one(args):
    cfg, S = args
    return run_chain(cfg, S)


def run_chains(cfg: ChainConfig, S: ScatterMatrix, n_chains: int = 1,
               workers: int = 1) -> list[PosteriorSamples]:
    """Independent chains seeded cfg.seed, cfg.seed + 1, ...; results are in seed
    order and do not depend on ``workers``."""
    cfgs = [replace(cfg, seed=cfg.seed + k) for k in range(n_chains)]
    if workers <= 1 or n_chains == 1:
        return [run_chain(c, S) for c in cfgs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_run_one, [(c, S) for c in cfgs]))
