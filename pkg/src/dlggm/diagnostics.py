"""Chain diagnostics and the statistical self-check suite."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, special, stats

from . import distributions as dist
from .core import edge_rows_cols, n_edges
from .distributions import RngStream
from .model import HyperParams, prior_concentration_check


# --- MCMC diagnostics ----------------------------------------------------------

def _autocov(x: np.ndarray) -> np.ndarray:
    n = x.size
    xc = x - x.mean()
    m = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, m)
    return np.fft.irfft(f * np.conj(f), m)[:n] / n


def effective_sample_size(trace) -> float:
    """ESS with Geyer's initial monotone sequence estimator, capped at len(trace)."""
    x = np.asarray(trace, dtype=float)
    n = x.size
    if n < 10:
        raise ValueError("need at least 10 values for an ESS estimate")
    acov = _autocov(x)
    if acov[0] <= 0:
        warnings.warn("constant trace; ESS reported as the trace length", RuntimeWarning)
        return float(n)
    rho = acov / acov[0]
    pairs = rho[: 2 * (n // 2)].reshape(-1, 2).sum(axis=1)
    tau = -1.0
    prev = math.inf
    for g in pairs:
        if g <= 0:
            break
        g = min(g, prev)
        tau += 2.0 * g
        prev = g
    if tau <= 0:
        return float(n)
    return float(min(n / tau, n))


def psrf(traces) -> float:
    """Gelman-Rubin potential scale reduction factor over equal-length chains."""
    x = np.asarray([np.asarray(t, dtype=float) for t in traces])
    m, n = x.shape
    if m < 2 or n < 2:
        raise ValueError("need at least two chains of length >= 2")
    means = x.mean(axis=1)
    B = n * means.var(ddof=1)
    W = x.var(axis=1, ddof=1).mean()
    if W == 0:
        return 1.0 if B == 0 else math.inf
    var_plus = (n - 1) / n * W + B / n
    return float(math.sqrt(var_plus / W))


@dataclass
class DiagnosticsReport:
    ess: dict
    trace_summary: dict
    psrf: float | None
    max_abs_offdiag: float
    n_draws: int

    def to_kv(self) -> dict:
        out = {"n_draws": self.n_draws, "max_abs_offdiag": self.max_abs_offdiag,
               "psrf_log_post": "NA" if self.psrf is None else self.psrf}
        out.update({f"ess_{k}": v for k, v in self.ess.items()})
        out.update({f"log_post_{k}": v for k, v in self.trace_summary.items()})
        return out


def diagnose(chains, seed: int = 0) -> DiagnosticsReport:
    """ESS of log-posterior, tau and three seeded-random omega_ij; PSRF of the
    log-posterior across chains when more than one is given."""
    chains = list(chains)
    first = chains[0]
    p = first.p
    lp = np.concatenate([c.kept_log_post() for c in chains])
    ess = {}
    tau = [c.latent_trace[c.kept - 1, 0] for c in chains]
    rng = np.random.default_rng(seed)
    picks = rng.choice(n_edges(p), size=min(3, n_edges(p)), replace=False)
    r, c_ = edge_rows_cols(p)
    if len(first) >= 10:
        ess["log_post"] = sum(effective_sample_size(c.kept_log_post()) for c in chains)
        ess["tau"] = sum(effective_sample_size(t) for t in tau)
        for f in picks:
            i, j = int(r[f]), int(c_[f])
            ess[f"omega_{i + 1}_{j + 1}"] = sum(
                effective_sample_size(ch.draws[:, i, j]) for ch in chains)
    summary = {"mean": float(lp.mean()), "sd": float(lp.std(ddof=1)) if lp.size > 1 else 0.0}
    for q in (0.025, 0.5, 0.975):
        summary[f"q{q:g}"] = float(np.quantile(lp, q))
    ps = None
    if len(chains) > 1:
        k = min(len(c) for c in chains)
        ps = psrf([c.kept_log_post()[:k] for c in chains])
    all_draws = np.concatenate([c.draws for c in chains])
    max_off = float(np.abs(all_draws[:, r, c_]).max()) if all_draws.size else 0.0
    return DiagnosticsReport(ess, summary, ps, max_off, all_draws.shape[0])


# --- validation suite -----------------------------------------------------------

@dataclass
class Check:
    name: str
    observed: float
    expected: float
    tolerance: str
    passed: bool

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.name}: observed={self.observed:.6g} "
                f"expected={self.expected:.6g} ({self.tolerance})")


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name, observed, expected, tolerance, passed):
        self.checks.append(Check(name, float(observed), float(expected), tolerance, bool(passed)))

    def extend(self, other: "ValidationReport"):
        self.checks.extend(other.checks)

    def lines(self) -> list[str]:
        return [c.line() for c in self.checks]

    def to_kv(self) -> dict:
        out = {}
        for c in self.checks:
            out[f"{c.name}.observed"] = c.observed
            out[f"{c.name}.expected"] = c.expected
            out[f"{c.name}.passed"] = int(c.passed)
        out["all_passed"] = int(self.passed)
        return out


SAMPLERS = {
    "normal": dist.sample_normal,
    "gamma": dist.sample_gamma,
    "exponential": dist.sample_exponential,
    "dirichlet": dist.sample_dirichlet,
    "inverse_gaussian": dist.sample_inverse_gaussian,
    "gig": dist.sample_gig,
    "mvn": dist.sample_mvn,
}


def _mean_check(rep, name, x, mean, var, k=5.0):
    se = math.sqrt(var / x.size)
    rep.add(name + ".mean", x.mean(), mean, f"{k:g} SE = {k * se:.3g}", abs(x.mean() - mean) <= k * se)


def _var_check(rep, name, x, var, fourth_central, k=5.0):
    se = math.sqrt(max(fourth_central - var**2, 0.0) / x.size)
    v = x.var(ddof=1)
    rep.add(name + ".var", v, var, f"{k:g} SE = {k * se:.3g}", abs(v - var) <= k * se)


def _rel_check(rep, name, observed, expected, rtol):
    rep.add(name, observed, expected, f"rel {rtol:g}", abs(observed - expected) <= rtol * abs(expected))


def _binned_chi2(rep, name, x, edges, probs, min_p=1e-6):
    """Chi-square goodness of fit of sample x against bin probabilities."""
    counts, _ = np.histogram(x, bins=edges)
    expected = probs * x.size
    keep = expected > 5
    stat = float(np.sum((counts[keep] - expected[keep]) ** 2 / expected[keep]))
    df = int(keep.sum()) - 1
    pval = float(stats.chi2.sf(stat, df))
    rep.add(name + ".chi2_pvalue", pval, 1.0, f"p > {min_p:g}", pval > min_p)


def _quad_bins(logpdf, edges):
    """Bin probabilities by adaptive quadrature of exp(logpdf) in log-x."""
    out = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        f = lambda u: math.exp(float(logpdf(math.exp(u))) + u)
        val, _ = integrate.quad(f, math.log(lo), math.log(hi), limit=200, epsabs=1e-13)
        out.append(val)
    return np.array(out)


def _integral(logpdf, lo, hi, points=None):
    f = lambda x: math.exp(float(logpdf(x)))
    val, _ = integrate.quad(f, lo, hi, limit=400, epsabs=1e-12, epsrel=1e-10, points=points)
    return val


def _log_integral(logpdf):
    """Integral over (0, inf) computed in log-x to resolve spikes near 0."""
    f = lambda u: math.exp(float(logpdf(math.exp(u))) + u) if u < 700 else 0.0
    total = 0.0
    grid = np.arange(-60.0, 61.0, 5.0)
    for lo, hi in zip(grid[:-1], grid[1:]):
        total += integrate.quad(f, lo, hi, limit=200, epsabs=1e-14, epsrel=1e-12)[0]
    return total


def validate_distributions(rng: RngStream, n: int = 10**6,
                           overrides: dict[str, Callable] | None = None) -> ValidationReport:
    """Moment, goodness-of-fit and normalization checks for every sampler.

    ``overrides`` swaps in alternative samplers by family name; used to show
    the suite rejects a broken implementation.
    """
    s = dict(SAMPLERS)
    s.update(overrides or {})
    rep = ValidationReport()

    # normal
    x = np.asarray(s["normal"](rng, 0.0, 1.0, size=n))
    rep.add("normal(0,1).mean", x.mean(), 0.0, "4/sqrt(n)", abs(x.mean()) <= 4 / math.sqrt(n))
    _var_check(rep, "normal(0,1)", x, 1.0, 3.0)
    x = np.asarray(s["normal"](rng, 5.0, 0.1, size=n))
    _mean_check(rep, "normal(5,0.1)", x, 5.0, 0.01)
    _rel_check(rep, "normal(5,0.1).var", x.var(ddof=1), 0.01, 0.05)
    r1 = RngStream(rng.seed).split(1)[0]
    r2 = RngStream(rng.seed).split(1)[0]
    a, b = s["normal"](r1, 0.0, 1.0, size=100), s["normal"](r2, 0.0, 1.0, size=100)
    rep.add("normal.determinism", float(np.array_equal(a, b)), 1.0, "exact", np.array_equal(a, b))

    # gamma (shape, rate)
    x = np.asarray(s["gamma"](rng, 3.0, 2.0, size=n))
    _rel_check(rep, "gamma(3,2).mean", x.mean(), 1.5, 0.01)
    _var_check(rep, "gamma(3,2)", x, 0.75, 3 * 3 * (3 + 2) / 2.0**4)
    x = np.asarray(s["gamma"](rng, 1.0, 1.0, size=n))
    _rel_check(rep, "gamma(1,1).median", np.median(x), math.log(2.0), 0.02)
    x = np.asarray(s["gamma"](rng, 0.001, 0.5, size=n))
    ok = bool(np.all(x > 0) and np.all(np.isfinite(x)))
    rep.add("gamma(0.001,0.5).positive", float(ok), 1.0, "all > 0, finite", ok)
    qs = np.linspace(0.55, 0.99, 12)
    edges = np.concatenate([[0.0], special.gammaincinv(0.001, qs) / 0.5, [np.inf]])
    probs = np.diff(np.concatenate([[0.0], qs, [1.0]]))
    _binned_chi2(rep, "gamma(0.001,0.5)", x, edges, probs)

    # exponential
    x = np.asarray(s["exponential"](rng, 0.5, size=n))
    _rel_check(rep, "exponential(0.5).mean", x.mean(), 2.0, 0.01)
    _rel_check(rep, "exponential(0.5).var", x.var(ddof=1), 4.0, 0.03)
    _rel_check(rep, "exponential(0.5).median", np.median(x), 2.0 * math.log(2.0), 0.02)

    # dirichlet
    x = np.asarray(s["dirichlet"](rng, np.ones(3), size=10**5))
    for k in range(3):
        _rel_check(rep, f"dirichlet(1,1,1).mean[{k}]", x[:, k].mean(), 1 / 3, 0.02)
    x = np.asarray(s["dirichlet"](rng, np.full(10, 1e-4), size=10**5))
    frac = float(np.mean(x.max(axis=1) > 0.99))
    rep.add("dirichlet(1e-4 x10).concentrated", frac, 0.95, "> 0.95", frac > 0.95)
    dev = float(np.max(np.abs(x.sum(axis=1) - 1.0)))
    rep.add("dirichlet.simplex", dev, 0.0, "|sum-1| <= 1e-12", dev <= 1e-12 and np.all(x >= 0))

    # inverse gaussian (mu, lambda)
    x = np.asarray(s["inverse_gaussian"](rng, 1.0, 1.0, size=n))
    _rel_check(rep, "ig(1,1).mean", x.mean(), 1.0, 0.01)
    x = np.asarray(s["inverse_gaussian"](rng, 2.0, 1.0, size=n))
    _rel_check(rep, "ig(2,1).var", x.var(ddof=1), 8.0, 0.05)
    x = np.asarray(s["inverse_gaussian"](rng, 1e6, 1.0, size=n))
    ok = bool(np.all(np.isfinite(x)) and np.all(x > 0))
    rep.add("ig(1e6,1).finite_positive", float(ok), 1.0, "all finite > 0", ok)
    edges = np.concatenate([[1e-12], np.logspace(-2, 6, 17), [1e16]])
    probs = _quad_bins(lambda v: dist.logpdf_inverse_gaussian(v, 1e6, 1.0), edges)
    _binned_chi2(rep, "ig(1e6,1)", x, edges, probs / probs.sum())

    # generalized inverse gaussian (order, rate, recip_rate)
    x = np.asarray(s["gig"](rng, -0.5, 1.0, 1.0, size=n))
    m2 = dist.gig_moment(-0.5, 1.0, 1.0, 2)
    _mean_check(rep, "gig(-0.5,1,1)", x, dist.gig_mean(-0.5, 1.0, 1.0), m2 - 1.0)
    x = np.asarray(s["gig"](rng, 2.0, 3.0, 0.0, size=n))
    _rel_check(rep, "gig(2,3,0).mean", x.mean(), 4.0 / 3.0, 0.01)
    lam, rho, chi = 1.5, 2.0, 1.0
    inv = 1.0 / np.asarray(s["gig"](rng, lam, rho, chi, size=n))
    y = np.asarray(s["gig"](rng, -lam, chi, rho, size=n))
    for k_, fa, fb in ((1, inv, y), (2, inv**2, y**2)):
        se = math.sqrt(fa.var() / n + fb.var() / n)
        rep.add(f"gig.reciprocal.moment{k_}", fa.mean() - fb.mean(), 0.0, f"5 SE = {5 * se:.3g}",
                abs(fa.mean() - fb.mean()) <= 5 * se)
    for lam, rho, chi in ((-299.0, 1.0, 5.0), (-44.55, 1.0, 100.0)):
        x = np.asarray(s["gig"](rng, lam, rho, chi, size=n // 4))
        mu = dist.gig_mean(lam, rho, chi)
        _mean_check(rep, f"gig({lam:g},{rho:g},{chi:g})", x, mu,
                    dist.gig_moment(lam, rho, chi, 2) - mu**2)
    for lam, rho, chi in ((-0.99, 1.0, 2e-10), (-0.3, 1.0, 0.2)):
        x = np.asarray(s["gig"](rng, lam, rho, chi, size=n // 4))
        qs = np.quantile(x, np.linspace(0, 1, 21)[1:-1])
        edges = np.concatenate([[dist.TINY], qs, [1e12]])
        probs = _quad_bins(lambda v: dist.logpdf_gig(v, lam, rho, chi), edges)
        _binned_chi2(rep, f"gig({lam:g},{rho:g},{chi:g})", x, edges, probs / probs.sum())

    # multivariate normal
    x = np.asarray(s["mvn"](rng, np.zeros(3), np.eye(3), size=10**5))
    dev = float(np.max(np.abs(np.cov(x.T) - np.eye(3))))
    rep.add("mvn(I3).cov", dev, 0.0, "abs 0.03", dev <= 0.03)
    cov = np.array([[2.0, 1.0], [1.0, 2.0]])
    x = np.asarray(s["mvn"](rng, np.array([1.0, 2.0]), cov, size=10**5))
    dev = float(np.max(np.abs(np.cov(x.T) - cov) / cov))
    rep.add("mvn([1,2],[[2,1],[1,2]]).cov", dev, 0.0, "rel 0.05", dev <= 0.05)

    rep.extend(validate_normalization())
    return rep


def validate_normalization(tol: float = 1e-6) -> ValidationReport:
    """Each log density integrates to 1 at three parameter points."""
    rep = ValidationReport()

    def add(name, val):
        rep.add(f"logpdf_{name}.integral", val, 1.0, f"abs {tol:g}", abs(val - 1.0) <= tol)

    for m, sd in ((0.0, 1.0), (5.0, 0.1), (-2.0, 3.0)):
        add(f"normal({m:g},{sd:g})",
            _integral(lambda v: dist.logpdf_normal(v, m, sd), -np.inf, np.inf, None))
    for k, r in ((2.0, 2.0), (0.5, 1.0), (7.0, 0.3)):
        add(f"gamma({k:g},{r:g})", _log_integral(lambda v: dist.logpdf_gamma(v, k, r)))
    for r in (0.5, 1.0, 4.0):
        add(f"exponential({r:g})", _log_integral(lambda v: dist.logpdf_exponential(v, r)))
    for mu, lam in ((1.0, 1.0), (2.0, 1.0), (0.5, 4.0)):
        add(f"ig({mu:g},{lam:g})", _log_integral(lambda v: dist.logpdf_inverse_gaussian(v, mu, lam)))
    for lam, rho, chi in ((-0.3, 1.0, 0.2), (-0.5, 1.0, 1.0), (2.0, 3.0, 0.5)):
        add(f"gig({lam:g},{rho:g},{chi:g})", _log_integral(lambda v: dist.logpdf_gig(v, lam, rho, chi)))
    for alpha in ((1.0, 1.0), (2.0, 3.0), (0.5, 0.7)):
        a_ = np.array(alpha)
        add(f"dirichlet{alpha}", _integral(
            lambda v: dist.logpdf_dirichlet(np.array([v, 1.0 - v]), a_) if 0 < v < 1 else -np.inf,
            0.0, 1.0))
    for mean, var in ((0.0, 1.0), (1.0, 2.0), (-1.0, 0.5)):
        add(f"mvn1({mean:g},{var:g})", _integral(
            lambda v: dist.logpdf_mvn(np.array([v]), np.array([mean]), np.array([[var]])),
            -np.inf, np.inf))
    return rep


def validate_prior_concentration(rng: RngStream, p_grid=(5, 10, 20),
                                 delta_grid=(1e-3, 1e-2, 1e-1),
                                 n_draws: int = 10**6) -> ValidationReport:
    """Fitted tail constant is finite and within a factor 2 across the delta
    grid for a = 1/p^2; smaller a leaves less mass above delta."""
    rep = ValidationReport()
    for p in p_grid:
        hp = HyperParams.for_dim(p)
        res = prior_concentration_check(rng, p, hp, delta_grid, n_draws=n_draws)
        rep.add(f"concentration(p={p},a=1/p^2).C", res.constant, res.constant, "finite > 0",
                np.isfinite(res.constant) and res.constant > 0)
        rep.add(f"concentration(p={p},a=1/p^2).spread", res.spread, 2.0, "<= 2", res.stable)
        small = float(np.min(delta_grid))
        tails = []
        for a in (hp.a, 1.0 / n_edges(p), 0.5):
            r = prior_concentration_check(rng, p, HyperParams.for_dim(p, a=a), [small],
                                          n_draws=n_draws // 4)
            tails.append(1.0 - r.prob_small[0])
        order = sorted(zip((hp.a, 1.0 / n_edges(p), 0.5), tails))
        mono = all(t0 < t1 for (_, t0), (_, t1) in zip(order, order[1:]))
        rep.add(f"concentration(p={p}).monotone_in_a", float(mono), 1.0, "tail grows with a", mono)
    return rep
