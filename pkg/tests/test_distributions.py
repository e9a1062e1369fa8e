import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special, stats

from dlggm import distributions as dist
from dlggm.distributions import GigParams, RngStream


def test_normal_examples(rng):
    x = dist.sample_normal(rng, 0.0, 1.0, size=10**6)
    assert abs(x.mean()) <= 4 / 1e3
    y = dist.sample_normal(rng, 5.0, 0.1, size=10**6)
    assert y.var() == pytest.approx(0.01, rel=0.05)


def test_gamma_examples(rng):
    assert dist.sample_gamma(rng, 3.0, 2.0, size=10**6).mean() == pytest.approx(1.5, rel=0.01)
    assert np.median(dist.sample_gamma(rng, 1.0, 1.0, size=10**6)) == pytest.approx(math.log(2), rel=0.02)
    x = dist.sample_gamma(rng, 0.001, 0.5, size=10**6)
    assert np.all(x > 0) and np.all(np.isfinite(x))
    # P(X < q) at a few quantiles of the exact law
    for q in (0.6, 0.8, 0.95):
        cut = special.gammaincinv(0.001, q) / 0.5
        assert np.mean(x < cut) == pytest.approx(q, abs=5 * math.sqrt(q * (1 - q) / 1e6))


def test_exponential_examples(rng):
    x = dist.sample_exponential(rng, 0.5, size=10**6)
    assert x.mean() == pytest.approx(2.0, rel=0.01)
    assert x.var() == pytest.approx(4.0, rel=0.03)
    assert np.median(x) == pytest.approx(2 * math.log(2), rel=0.02)


def test_dirichlet_examples(rng):
    x = dist.sample_dirichlet(rng, np.ones(3), size=10**5)
    np.testing.assert_allclose(x.mean(axis=0), 1 / 3, rtol=0.02)
    y = dist.sample_dirichlet(rng, np.full(10, 1e-4), size=10**5)
    assert np.mean(y.max(axis=1) > 0.99) > 0.95
    for z in (x, y):
        assert z.min() >= 0
        assert np.max(np.abs(z.sum(axis=1) - 1)) <= 1e-12


def test_inverse_gaussian_examples(rng):
    assert dist.sample_inverse_gaussian(rng, 1.0, 1.0, size=10**6).mean() == pytest.approx(1.0, rel=0.01)
    assert dist.sample_inverse_gaussian(rng, 2.0, 1.0, size=10**6).var() == pytest.approx(8.0, rel=0.05)
    x = dist.sample_inverse_gaussian(rng, 1e6, 1.0, size=10**6)
    assert np.all(np.isfinite(x)) and np.all(x > 0)
    # large-mu law is close to Levy; compare P(X < 1) with the density integral
    p1 = integrate.quad(lambda v: math.exp(dist.logpdf_inverse_gaussian(v, 1e6, 1.0)), 0, 1)[0]
    assert np.mean(x < 1.0) == pytest.approx(p1, abs=5 * math.sqrt(p1 * (1 - p1) / 1e6))


def test_inverse_gaussian_against_scipy(rng):
    mu, lam = 0.7, 2.5
    x = dist.sample_inverse_gaussian(rng, mu, lam, size=2 * 10**5)
    assert stats.kstest(x, stats.invgauss(mu / lam, scale=lam).cdf).pvalue > 1e-4


def test_gig_examples(rng):
    n = 10**6
    x = dist.sample_gig(rng, -0.5, 1.0, 1.0, size=n)
    assert dist.gig_mean(-0.5, 1.0, 1.0) == pytest.approx(1.0, rel=1e-12)
    var = dist.gig_moment(-0.5, 1.0, 1.0, 2) - 1.0
    assert abs(x.mean() - 1.0) <= 5 * math.sqrt(var / n)
    assert dist.sample_gig(rng, 2.0, 3.0, 0.0, size=n).mean() == pytest.approx(4 / 3, rel=0.01)
    p = GigParams(1.5, 2.0, 1.0)
    inv = 1.0 / dist.sample_gig(rng, p, size=n)
    y = dist.sample_gig(rng, -1.5, 1.0, 2.0, size=n)
    for k in (1, 2):
        a, b = inv**k, y**k
        assert abs(a.mean() - b.mean()) <= 5 * math.sqrt(a.var() / n + b.var() / n)


@pytest.mark.parametrize("lam,rho,chi", [(0.3, 2.0, 0.01), (-0.8, 1.0, 3.0), (4.0, 0.5, 7.0),
                                         (-20.0, 1.0, 40.0), (0.9, 1.0, 1e-4)])
def test_gig_ks_against_quadrature(rng, lam, rho, chi):
    x = dist.sample_gig(rng, lam, rho, chi, size=50_000)
    lognorm = dist.gig_log_norm(lam, rho, chi)

    def cdf(v):
        f = lambda u: math.exp(dist.logpdf_gig(math.exp(u), lam, rho, chi) + u)
        return integrate.quad(f, -60.0, math.log(v), limit=200, epsabs=1e-13)[0]

    qs = np.quantile(x, np.linspace(0.05, 0.95, 10))
    for q, level in zip(qs, np.linspace(0.05, 0.95, 10)):
        assert cdf(q) == pytest.approx(level, abs=5 * math.sqrt(level * (1 - level) / 50_000))
    assert math.isfinite(lognorm)


def test_gig_strongly_negative_order(rng):
    # tau update regime at p=20 with a = 1/p^2
    nu = 190
    lam = nu / 400 - nu
    x = dist.sample_gig(rng, lam, 1.0, 2.0 * nu * 3.0, size=10**6)
    assert np.all(np.isfinite(x)) and np.all(x > 0)
    assert x.mean() == pytest.approx(dist.gig_mean(lam, 1.0, 2.0 * nu * 3.0), rel=0.02)


def test_mvn_examples(rng):
    x = dist.sample_mvn(rng, np.zeros(3), np.eye(3), size=10**5)
    np.testing.assert_allclose(np.cov(x.T), np.eye(3), atol=0.03)
    cov = np.array([[2.0, 1.0], [1.0, 2.0]])
    y = dist.sample_mvn(rng, np.array([1.0, 2.0]), cov, size=10**5)
    np.testing.assert_allclose(np.cov(y.T), cov, rtol=0.05)
    np.testing.assert_allclose(y.mean(axis=0), [1.0, 2.0], atol=0.03)
    a = dist.sample_mvn(RngStream(4), np.array([3.0]), np.array([[4.0]]), size=5)
    b = 3.0 + 2.0 * RngStream(4).standard_normal((5, 1))
    np.testing.assert_allclose(a, b, rtol=1e-15)


@pytest.mark.parametrize("call", [
    lambda r: dist.sample_gamma(r, 0.0, 1.0),
    lambda r: dist.sample_gamma(r, 1.0, -1.0),
    lambda r: dist.sample_exponential(r, 0.0),
    lambda r: dist.sample_dirichlet(r, np.array([1.0, 0.0])),
    lambda r: dist.sample_inverse_gaussian(r, -1.0, 1.0),
    lambda r: dist.sample_gig(r, -0.5, 1.0, 0.0),
    lambda r: dist.sample_gig(r, 0.5, -1.0, 1.0),
    lambda r: dist.sample_normal(r, 0.0, -1.0),
])
def test_invalid_parameters_raise(rng, call):
    with pytest.raises(ValueError):
        call(rng)


def test_mvn_not_pd_raises(rng):
    with pytest.raises(ValueError):
        dist.sample_mvn(rng, np.zeros(2), np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_logpdf_examples():
    assert dist.logpdf_normal(0.0, 0.0, 1.0) == pytest.approx(-0.5 * math.log(2 * math.pi), rel=1e-15)
    assert dist.logpdf_gamma(1.0, 2.0, 2.0) == pytest.approx(math.log(4 * math.exp(-2)), rel=1e-14)
    assert dist.logpdf_gamma(-1.0, 2.0, 2.0) == -np.inf
    assert dist.logpdf_exponential(-0.1, 1.0) == -np.inf
    assert dist.logpdf_gig(0.0, 0.5, 1.0, 1.0) == -np.inf
    assert dist.logpdf_inverse_gaussian(2.0, 1.0, 3.0) == pytest.approx(
        stats.invgauss(1 / 3, scale=3.0).logpdf(2.0), rel=1e-12)
    assert dist.logpdf_dirichlet(np.array([0.2, 0.3, 0.5]), np.array([2.0, 3.0, 4.0])) == pytest.approx(
        stats.dirichlet([2.0, 3.0, 4.0]).logpdf([0.2, 0.3, 0.5]), rel=1e-12)
    with pytest.raises(ValueError):
        dist.logpdf_gamma(1.0, -2.0, 1.0)


def test_gig_logpdf_integrates_to_one():
    f = lambda u: math.exp(dist.logpdf_gig(math.exp(u), -0.3, 1.0, 0.2) + u)
    total = sum(integrate.quad(f, lo, lo + 5, limit=200, epsabs=1e-14)[0] for lo in range(-60, 60, 5))
    assert total == pytest.approx(1.0, abs=1e-6)


def test_gig_moment_matches_scipy():
    for lam, rho, chi in ((0.5, 2.0, 3.0), (-1.2, 1.0, 0.7)):
        b = math.sqrt(rho * chi)
        ref = stats.geninvgauss(lam, b, scale=math.sqrt(chi / rho)).mean()
        assert dist.gig_mean(lam, rho, chi) == pytest.approx(ref, rel=1e-9)


def test_normalization_report():
    assert dist is not None
    from dlggm.diagnostics import validate_normalization
    rep = validate_normalization()
    assert rep.passed, [c.line() for c in rep.checks if not c.passed]
    assert len(rep.checks) == 21


SAMPLE_CALLS = {
    "normal": lambda r: dist.sample_normal(r, 1.0, 2.0, size=50),
    "gamma": lambda r: dist.sample_gamma(r, 0.7, 1.3, size=50),
    "exponential": lambda r: dist.sample_exponential(r, 0.5, size=50),
    "dirichlet": lambda r: dist.sample_dirichlet(r, np.full(4, 0.3), size=50),
    "ig": lambda r: dist.sample_inverse_gaussian(r, 2.0, 1.0, size=50),
    "gig": lambda r: dist.sample_gig(r, -3.0, 1.0, 0.5, size=50),
    "mvn": lambda r: dist.sample_mvn(r, np.zeros(2), np.eye(2), size=50),
}


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**63 - 1), st.sampled_from(sorted(SAMPLE_CALLS)))
def test_seed_determinism(seed, family):
    f = SAMPLE_CALLS[family]
    np.testing.assert_array_equal(f(RngStream(seed)), f(RngStream(seed)))


@settings(max_examples=40, deadline=None)
@given(st.floats(-50, 50), st.floats(1e-3, 1e3), st.floats(1e-8, 1e3), st.integers(0, 2**32))
def test_gig_draws_positive_finite(lam, rho, chi, seed):
    x = dist.sample_gig(RngStream(seed), lam, rho, chi, size=200)
    assert np.all(np.isfinite(x)) and np.all(x > 0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(1e-3, 10.0), min_size=2, max_size=12), st.integers(0, 2**32))
def test_dirichlet_on_simplex(alpha, seed):
    x = dist.sample_dirichlet(RngStream(seed), np.array(alpha), size=100)
    assert x.min() >= 0
    assert np.max(np.abs(x.sum(axis=1) - 1)) <= 1e-12
