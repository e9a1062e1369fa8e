"""Random variate generators and log densities used by the sampler.

All samplers take an :class:`RngStream` first and accept array parameters
that broadcast against an optional ``size``.

Parameterizations:

* Gamma uses shape/RATE, so ``Gamma(k, r)`` has mean ``k / r``.
* The generalized inverse Gaussian ``GIG(order, rate, recip_rate)`` has density
  proportional to ``x**(order - 1) * exp(-(rate * x + recip_rate / x) / 2)``.
* The inverse Gaussian ``IG(mu, lam)`` has mean ``mu`` and shape ``lam``.
"""

from __future__ import annotations

from dataclasses import dataclass

import mpmath
import numpy as np
from scipy import special

from .core import NotPositiveDefiniteError, cholesky

TINY = np.finfo(float).tiny
_LOG_2PI = np.log(2.0 * np.pi)


class RngStream:
    """Seeded random stream (PCG64). One stream per chain; never share."""

    def __init__(self, seed: int = 0, *, _seed_seq: np.random.SeedSequence | None = None):
        if _seed_seq is None:
            if not (0 <= int(seed) < 2**64):
                raise ValueError("seed must be a 64-bit unsigned integer")
            _seed_seq = np.random.SeedSequence(int(seed))
        self.seed = int(seed)
        self._seed_seq = _seed_seq
        self.gen = np.random.Generator(np.random.PCG64(_seed_seq))

    def split(self, n: int = 1) -> list["RngStream"]:
        """Deterministically fork ``n`` independent child streams."""
        return [RngStream(self.seed, _seed_seq=s) for s in self._seed_seq.spawn(n)]

    def uniform(self, size=None):
        return self.gen.random(size)

    def standard_normal(self, size=None):
        return self.gen.standard_normal(size)

    def standard_exponential(self, size=None):
        return self.gen.standard_exponential(size)


def _positive(name, value):
    v = np.asarray(value, dtype=float)
    if np.any(~(v > 0)):
        raise ValueError(f"{name} must be positive")
    return v


def _shape_of(size, *arrays):
    if size is not None:
        return tuple(np.atleast_1d(size))
    return np.broadcast_shapes(*(np.shape(a) for a in arrays))


def _scalarize(x, size, *params):
    if size is None and all(np.ndim(p) == 0 for p in params):
        return float(x)
    return x


# --- univariate families -------------------------------------------------------

def sample_normal(rng: RngStream, mean=0.0, sd=1.0, size=None):
    sd = _positive("sd", sd)
    shape = _shape_of(size, mean, sd)
    x = np.asarray(mean) + sd * rng.standard_normal(shape)
    return _scalarize(x, size, mean, sd)


def sample_exponential(rng: RngStream, rate=1.0, size=None):
    rate = _positive("rate", rate)
    shape = _shape_of(size, rate)
    return _scalarize(rng.standard_exponential(shape) / rate, size, rate)


def sample_log_gamma(rng: RngStream, shape, rate=1.0, size=None):
    """log of a Gamma(shape, rate) draw, accurate for tiny shapes.

    For shape < 1 uses Gamma(k) = Gamma(k + 1) * U**(1/k), evaluated in logs.
    """
    k = _positive("shape", shape)
    rate = _positive("rate", rate)
    out_shape = _shape_of(size, k, rate)
    k = np.broadcast_to(k, out_shape)
    small = k < 1
    g = rng.gen.standard_gamma(np.where(small, k + 1.0, k), out_shape)
    logx = np.log(g)
    if np.any(small):
        u = rng.uniform(out_shape)
        logx = np.where(small, logx + np.log(u) / k, logx)
    return _scalarize(logx - np.log(rate), size, shape, rate)


def sample_gamma(rng: RngStream, shape, rate=1.0, size=None):
    """Gamma(shape, rate) draw. Values below the smallest normal double are
    returned as that number so every draw stays strictly positive."""
    k = _positive("shape", shape)
    r = _positive("rate", rate)
    out_shape = _shape_of(size, k, r)
    x = rng.gen.standard_gamma(np.broadcast_to(k, out_shape), out_shape) / r
    return _scalarize(np.maximum(x, TINY), size, shape, rate)


def sample_dirichlet(rng: RngStream, alpha, size=None):
    """Dirichlet draw(s) built from normalized log-gamma variates.

    Returns shape ``(len(alpha),)`` or ``size + (len(alpha),)``. Components are
    floored at the smallest normal double, so the result lies in the open
    simplex up to ~1e-300.
    """
    alpha = np.asarray(alpha, dtype=float)
    if alpha.ndim != 1 or alpha.size < 2:
        raise ValueError("alpha must be a vector of length >= 2")
    _positive("alpha", alpha)
    lead = () if size is None else tuple(np.atleast_1d(size))
    logg = sample_log_gamma(rng, alpha, 1.0, size=lead + alpha.shape)
    logg = logg - logg.max(axis=-1, keepdims=True)
    w = np.exp(logg)
    w /= w.sum(axis=-1, keepdims=True)
    w = np.maximum(w, TINY)
    return w / w.sum(axis=-1, keepdims=True)


def sample_inverse_gaussian(rng: RngStream, mu, lam, size=None):
    """Inverse Gaussian via the transformation-with-rejection method.

    One chi-square(1) and one uniform per draw; the smaller root is written in
    a cancellation-free form so very large ``mu`` stays accurate.
    """
    mu = _positive("mu", mu)
    lam = _positive("lam", lam)
    shape = _shape_of(size, mu, lam)
    y = rng.standard_normal(shape) ** 2
    r = mu * y / (2.0 * lam)
    # 1 + r - sqrt(r^2 + 2r) == 1 / (1 + r + sqrt(r^2 + 2r))
    root = r * np.sqrt(1.0 + 2.0 / np.where(r > 0, r, 1.0))
    big = 1.0 + r + np.where(r > 0, root, 0.0)
    x_small = mu / big
    u = rng.uniform(shape)
    x = np.where(u <= 1.0 / (1.0 + 1.0 / big), x_small, mu * big)
    return _scalarize(x, size, mu, lam)


# --- generalized inverse Gaussian ---------------------------------------------

@dataclass(frozen=True)
class GigParams:
    """GIG(order, rate, recip_rate): density ~ x^(order-1) exp(-(rate x + recip_rate / x) / 2)."""

    order: float
    rate: float
    recip_rate: float

    def __post_init__(self):
        _check_gig(np.asarray(self.order, float), np.asarray(self.rate, float),
                   np.asarray(self.recip_rate, float))


def _check_gig(lam, rho, chi):
    if np.any(~np.isfinite(lam)) or np.any(rho < 0) or np.any(chi < 0):
        raise ValueError("GIG needs finite order and nonnegative rate / recip_rate")
    if np.any((lam <= 0) & ~(chi > 0)):
        raise ValueError("GIG with order <= 0 needs recip_rate > 0")
    if np.any((lam >= 0) & ~(rho > 0)):
        raise ValueError("GIG with order >= 0 needs rate > 0")


def _gig_mode(lam, om):
    # mode of y^(lam-1) exp(-om/2 (y + 1/y))
    return np.where(
        lam >= 1.0,
        (np.sqrt((lam - 1.0) ** 2 + om**2) + (lam - 1.0)) / om,
        om / (np.sqrt((1.0 - lam) ** 2 + om**2) + (1.0 - lam)),
    )


def _rejection_loop(rng, n, propose):
    """Run ``propose(idx) -> (x, accept)`` on pending indices until all accept."""
    out = np.empty(n)
    pending = np.arange(n)
    while pending.size:
        x, ok = propose(pending)
        out[pending[ok]] = x[ok]
        pending = pending[~ok]
    return out


def _gig_rou_shift(rng, lam, om):
    """Ratio-of-uniforms with mode shift (lam > 2 or om > 3)."""
    t = 0.5 * (lam - 1.0)
    s = 0.25 * om
    xm = _gig_mode(lam, om)
    nc = t * np.log(xm) - s * (xm + 1.0 / xm)
    a = -(2.0 * (lam + 1.0) / om + xm)
    b = 2.0 * (lam - 1.0) * xm / om - 1.0
    c = xm
    p = b - a * a / 3.0
    q = 2.0 * a**3 / 27.0 - a * b / 3.0 + c
    fi = np.arccos(np.clip(-q / (2.0 * np.sqrt(-(p**3) / 27.0)), -1.0, 1.0))
    fak = 2.0 * np.sqrt(-p / 3.0)
    y1 = fak * np.cos(fi / 3.0) - a / 3.0
    y2 = fak * np.cos(fi / 3.0 + 4.0 / 3.0 * np.pi) - a / 3.0
    uplus = (y1 - xm) * np.exp(t * np.log(y1) - s * (y1 + 1.0 / y1) - nc)
    uminus = (y2 - xm) * np.exp(t * np.log(y2) - s * (y2 + 1.0 / y2) - nc)

    def propose(idx):
        u = uminus[idx] + rng.uniform(idx.size) * (uplus[idx] - uminus[idx])
        v = rng.uniform(idx.size)
        x = u / v + xm[idx]
        with np.errstate(invalid="ignore", divide="ignore"):
            logf = t[idx] * np.log(x) - s[idx] * (x + 1.0 / x) - nc[idx]
        return x, (x > 0) & (np.log(v) <= logf)

    return _rejection_loop(rng, lam.size, propose)


def _gig_rou_noshift(rng, lam, om):
    """Ratio-of-uniforms without shift (0 <= lam <= 2, moderate om)."""
    t = 0.5 * (lam - 1.0)
    s = 0.25 * om
    xm = _gig_mode(lam, om)
    nc = t * np.log(xm) - s * (xm + 1.0 / xm)
    ym = ((lam + 1.0) + np.sqrt((lam + 1.0) ** 2 + om**2)) / om
    um = np.exp(0.5 * (lam + 1.0) * np.log(ym) - s * (ym + 1.0 / ym) - nc)

    def propose(idx):
        u = um[idx] * rng.uniform(idx.size)
        v = rng.uniform(idx.size)
        x = u / v
        with np.errstate(divide="ignore", invalid="ignore"):
            ok = (x > 0) & (np.log(v) <= t[idx] * np.log(x) - s[idx] * (x + 1.0 / x) - nc[idx])
        return x, ok

    return _rejection_loop(rng, lam.size, propose)


def _gig_regions(rng, lam, om):
    """Rejection from a piecewise hat for 0 <= lam < 1 and small om.

    The density is not T-concave here; the hat is constant on (0, x0), a power
    function on (x0, 2/om) and exponential beyond.
    """
    xm = _gig_mode(lam, om)
    x0 = om / (1.0 - lam)
    k0 = np.exp((lam - 1.0) * np.log(xm) - 0.5 * om * (xm + 1.0 / xm))
    A0 = k0 * x0
    two_om = 2.0 / om
    far = x0 >= two_om
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        k1 = np.where(far, 0.0, np.exp(-om))
        lam_safe = np.where(lam == 0, 1.0, lam)
        A1 = np.where(
            far, 0.0,
            np.where(lam == 0, k1 * np.log(2.0 / om**2),
                     k1 / lam_safe * (two_om**lam - x0**lam)),
        )
        k2 = np.where(far, x0 ** (lam - 1.0), two_om ** (lam - 1.0))
        A2 = np.where(far, k2 * 2.0 * np.exp(-om * x0 / 2.0) / om, k2 * 2.0 * np.exp(-1.0) / om)
    Atot = A0 + A1 + A2
    edge = np.maximum(x0, two_om)

    def propose(idx):
        la, o = lam[idx], om[idx]
        a0, a1 = A0[idx], A1[idx]
        v = Atot[idx] * rng.uniform(idx.size)
        in0 = v <= a0
        in1 = ~in0 & (v - a0 <= a1)
        in2 = ~in0 & ~in1
        x = np.empty(idx.size)
        hx = np.empty(idx.size)
        x[in0] = x0[idx][in0] * v[in0] / a0[in0]
        hx[in0] = k0[idx][in0]
        if np.any(in1):
            v1 = v[in1] - a0[in1]
            l1 = la[in1]
            o1 = o[in1]
            kk = k1[idx][in1]
            zero = l1 == 0
            ls = np.where(zero, 1.0, l1)
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                xa = o1 * np.exp(np.exp(o1) * v1)
                xb = (x0[idx][in1] ** ls + ls / kk * v1) ** (1.0 / ls)
            x[in1] = np.where(zero, xa, xb)
            hx[in1] = np.where(zero, kk / x[in1], kk * x[in1] ** (l1 - 1.0))
        if np.any(in2):
            v2 = v[in2] - a0[in2] - a1[in2]
            o2 = o[in2]
            kk = k2[idx][in2]
            x[in2] = -2.0 / o2 * np.log(np.exp(-o2 / 2.0 * edge[idx][in2]) - o2 / (2.0 * kk) * v2)
            hx[in2] = kk * np.exp(-o2 / 2.0 * x[in2])
        u = rng.uniform(idx.size) * hx
        with np.errstate(divide="ignore", invalid="ignore"):
            ok = np.log(u) <= (la - 1.0) * np.log(x) - o / 2.0 * (x + 1.0 / x)
        return x, ok & (x > 0) & np.isfinite(x)

    return _rejection_loop(rng, lam.size, propose)


def _standard_gig(rng, lam, om):
    """Draws with density ~ y^(lam-1) exp(-om/2 (y + 1/y)), lam >= 0, om > 0."""
    out = np.empty(lam.size)
    shift = (lam > 2.0) | (om > 3.0)
    noshift = ~shift & ((lam >= 1.0 - 2.25 * om**2) | (om > 0.2))
    regions = ~shift & ~noshift
    # fixed regime order keeps the random stream consumption deterministic
    for mask, algo in ((shift, _gig_rou_shift), (noshift, _gig_rou_noshift),
                       (regions, _gig_regions)):
        if np.any(mask):
            out[mask] = algo(rng, lam[mask], om[mask])
    return out


def sample_gig(rng: RngStream, order, rate=None, recip_rate=None, size=None):
    """GIG(order, rate, recip_rate) variates; parameters broadcast.

    Negative orders use 1/X ~ GIG(-order, recip_rate, rate). ``recip_rate == 0``
    reduces to Gamma(order, rate / 2); ``rate == 0`` to an inverse gamma.
    """
    if isinstance(order, GigParams):
        if size is None:
            size = rate
        order, rate, recip_rate = order.order, order.rate, order.recip_rate
    lam0, rho0, chi0 = (np.asarray(v, dtype=float) for v in (order, rate, recip_rate))
    _check_gig(lam0, rho0, chi0)
    shape = _shape_of(size, lam0, rho0, chi0)
    lam = np.broadcast_to(lam0, shape).ravel()
    rho = np.broadcast_to(rho0, shape).ravel()
    chi = np.broadcast_to(chi0, shape).ravel()
    out = np.empty(lam.size)

    as_gamma = chi == 0
    as_invgamma = rho == 0
    general = ~as_gamma & ~as_invgamma
    if np.any(as_gamma):
        out[as_gamma] = sample_gamma(rng, lam[as_gamma], rho[as_gamma] / 2.0)
    if np.any(as_invgamma):
        out[as_invgamma] = 1.0 / sample_gamma(rng, -lam[as_invgamma], chi[as_invgamma] / 2.0)
    if np.any(general):
        la, r, c = lam[general], rho[general], chi[general]
        om = np.sqrt(r * c)
        scale = np.sqrt(c / r)
        y = _standard_gig(rng, np.abs(la), om)
        out[general] = np.where(la < 0, scale / y, scale * y)
    out = np.clip(out, TINY, np.finfo(float).max)
    return _scalarize(out.reshape(shape), size, order, rate, recip_rate)


def gig_moment(order, rate, recip_rate, k: float = 1.0) -> float:
    """E[X^k] = (chi/rho)^(k/2) K_{lam+k}(w) / K_lam(w), w = sqrt(rho chi).

    Evaluated with mpmath so large orders do not overflow.
    """
    w = mpmath.sqrt(mpmath.mpf(rate) * recip_rate)
    ratio = mpmath.besselk(order + k, w) / mpmath.besselk(order, w)
    return float((mpmath.mpf(recip_rate) / rate) ** (mpmath.mpf(k) / 2) * ratio)


def gig_mean(order, rate, recip_rate) -> float:
    return gig_moment(order, rate, recip_rate, 1.0)


# --- multivariate normal -------------------------------------------------------

def sample_mvn(rng: RngStream, mean, cov, size=None):
    """mean + L z with L the lower Cholesky factor of ``cov``."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    cov_a = cov.dense() if hasattr(cov, "dense") else np.atleast_2d(np.asarray(cov, dtype=float))
    L = cholesky(cov_a)
    if L is None:
        raise NotPositiveDefiniteError("covariance is not positive definite", cov_a)
    lead = () if size is None else tuple(np.atleast_1d(size))
    z = rng.standard_normal(lead + mean.shape)
    return mean + z @ L.T


# --- log densities -------------------------------------------------------------

def _support(x, mask, value):
    return np.where(mask, value, -np.inf)


def logpdf_normal(x, mean=0.0, sd=1.0):
    sd = _positive("sd", sd)
    z = (np.asarray(x, dtype=float) - mean) / sd
    return -0.5 * _LOG_2PI - np.log(sd) - 0.5 * z * z


def logpdf_gamma(x, shape, rate):
    k = _positive("shape", shape)
    r = _positive("rate", rate)
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = k * np.log(r) - special.gammaln(k) + (k - 1.0) * np.log(x) - r * x
    return _support(x, x > 0, val)


def logpdf_exponential(x, rate):
    r = _positive("rate", rate)
    x = np.asarray(x, dtype=float)
    return _support(x, x >= 0, np.log(r) - r * x)


def logpdf_inverse_gaussian(x, mu, lam):
    mu = _positive("mu", mu)
    lam = _positive("lam", lam)
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = 0.5 * (np.log(lam) - _LOG_2PI - 3.0 * np.log(x)) - lam * (x - mu) ** 2 / (2.0 * mu**2 * x)
    return _support(x, x > 0, val)


def gig_log_norm(order, rate, recip_rate):
    """log of the GIG normalizing constant (density = exp(kernel - log_norm))."""
    lam, rho, chi = (np.asarray(v, dtype=float) for v in (order, rate, recip_rate))
    _check_gig(lam, rho, chi)
    if np.all(chi == 0):
        return special.gammaln(lam) - lam * np.log(rho / 2.0)
    if np.all(rho == 0):
        return special.gammaln(-lam) + lam * np.log(chi / 2.0)
    w = np.sqrt(rho * chi)
    return np.log(2.0) + np.log(special.kve(lam, w)) - w + 0.5 * lam * np.log(chi / rho)


def logpdf_gig(x, order, rate, recip_rate):
    x = np.asarray(x, dtype=float)
    lognorm = gig_log_norm(order, rate, recip_rate)
    with np.errstate(divide="ignore", invalid="ignore"):
        kern = (order - 1.0) * np.log(x) - 0.5 * (rate * x + recip_rate / x)
    return _support(x, x > 0, kern - lognorm)


def logpdf_dirichlet(x, alpha):
    alpha = _positive("alpha", alpha)
    x = np.asarray(x, dtype=float)
    on_simplex = np.all(x > 0, axis=-1) & (np.abs(x.sum(axis=-1) - 1.0) < 1e-10)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = (special.gammaln(alpha.sum()) - special.gammaln(alpha).sum()
               + np.sum((alpha - 1.0) * np.log(x), axis=-1))
    return _support(x, on_simplex, val)


def logpdf_mvn(x, mean, cov):
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    L = cholesky(cov)
    if L is None:
        raise NotPositiveDefiniteError("covariance is not positive definite", cov)
    d = np.atleast_1d(np.asarray(x, dtype=float)) - mean
    z = np.linalg.solve(L, d.T).T
    k = L.shape[0]
    return -0.5 * (k * _LOG_2PI + np.sum(z * z, axis=-1)) - np.sum(np.log(np.diag(L)))
