"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""

import math
import time

import numpy as np
from scipy import integrate

from dlggm.cli import main
from dlggm.core import PrecisionMatrix, ScatterMatrix, SymMatrix, cholesky
from dlggm.distributions import RngStream, logpdf_gig
from dlggm.gibbs import (column_conditional, draw_psi, initial_state, make_partition,
                         sample_column, sweep)
from dlggm.io import read_kv
from dlggm.model import (HyperParams, LatentState, ModelState, prior_concentration_check,
                         sample_prior_batch)

from conftest import make_fixture


def test_c1_distributional_exactness(acceptance_report, tmp_path):
    t0 = time.time()
    code = main(["validate", "--out", str(tmp_path / "validate.txt")])
    elapsed = time.time() - t0
    kv = read_kv(tmp_path / "validate.txt")
    n_checks = sum(k.endswith(".passed") for k in kv)
    ok = code == 0 and elapsed < 300
    acceptance_report("C1 validate suite", ok,
                      f"exit={code}, {n_checks} checks, {elapsed:.1f}s (limit 300s)")
    assert ok


def test_c2_conditional_law_p2(acceptance_report):
    om = PrecisionMatrix.from_dense([[1.8, -0.4], [-0.4, 1.2]])
    n = 30
    S = ScatterMatrix(SymMatrix.from_dense([[25.0, 6.0], [6.0, 33.0]]), n)
    lat = LatentState(np.array([0.9]), np.array([1.0]), 0.7)
    part = make_partition(om, S, ModelState(om, lat), 2)
    cc = column_conditional(part, lat.tau, n)
    A, mean = float(cc.A[0, 0]), float(cc.mean[0])
    k, rate = cc.eta_shape, cc.eta_rate
    rng = RngStream(2024)
    N = 10**5
    draws = np.array([(d[0][0], d[1]) for d in (sample_column(rng, part, lat.tau, n)
                                                for _ in range(N))])
    theta, eta = draws[:, 0], draws[:, 1]
    z = {
        "theta.mean": (theta.mean() - mean) / math.sqrt(A / N),
        "theta.var": (theta.var(ddof=1) - A) / math.sqrt(2 * A**2 / N),
        "eta.mean": (eta.mean() - k / rate) / math.sqrt(k / rate**2 / N),
        "eta.var": (eta.var(ddof=1) - k / rate**2)
        / math.sqrt((3 * k * (k + 2) / rate**4 - (k / rate**2) ** 2) / N),
    }
    ok = all(abs(v) <= 5 for v in z.values())
    acceptance_report("C2 p=2 conditional law", ok,
                      ", ".join(f"{name} z={v:+.2f}" for name, v in z.items()) + " (limit 5 SE)")
    assert ok


def test_c3_pd_invariance(acceptance_report):
    sweeps_per_p = 10**4
    failures = 0
    total = 0
    for p in (3, 10, 25):
        for k, n in enumerate((10, 50, 200)):
            _, _, S = make_fixture(p, n, seed=100 * p + n)
            hp = HyperParams.for_dim(p)
            rng = RngStream(p * 1000 + n)
            state = initial_state(p)
            m = sweeps_per_p // 3 + (1 if k < sweeps_per_p % 3 else 0)
            for _ in range(m):
                state = sweep(rng, state, S, hp)
                failures += cholesky(state.omega.dense()) is None
                total += 1
    ok = failures == 0 and total >= 3 * 10**4
    acceptance_report("C3 PD invariance", ok,
                      f"{failures} Cholesky failures in {total} sweeps over p in (3,10,25) x n in (10,50,200)")
    assert ok


def test_c4_psi_full_conditional(acceptance_report):
    omega, phi, tau = 0.3, 1.0, 0.8
    chi = omega**2 / (phi**2 * tau**2)
    N = 10**6
    x = draw_psi(RngStream(77), np.full(N, omega), np.full(N, phi), tau)
    # exact conditional: density proportional to psi^(-1/2) exp(-chi/(2 psi) - psi/2)
    logf = lambda v: -0.5 * math.log(v) - chi / (2 * v) - v / 2
    edges = np.concatenate([[0.0], np.geomspace(1e-3, 30.0, 120), [np.inf]])
    mass = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mass.append(integrate.quad(lambda v: math.exp(logf(v)), lo, hi, limit=200)[0])
    mass = np.array(mass)
    mass /= mass.sum()
    # cross-check the quadrature normalizer against the closed form
    closed = integrate.quad(lambda v: math.exp(logpdf_gig(v, 0.5, 1.0, chi)), 0, np.inf)[0]
    counts, _ = np.histogram(x, bins=edges)
    tv = 0.5 * float(np.abs(counts / N - mass).sum())
    ok = tv < 0.02 and abs(closed - 1) < 1e-6
    acceptance_report("C4 psi full conditional", ok,
                      f"TV={tv:.4f} over {edges.size - 1} bins at 1e6 draws (limit 0.02)")
    assert ok


def test_c5_prior_concentration(acceptance_report):
    deltas = np.geomspace(1e-3, 1e-1, 5)
    parts, ok = [], True
    for p in (5, 10, 20):
        res = prior_concentration_check(RngStream(p), p, HyperParams.for_dim(p), deltas,
                                        n_draws=10**6)
        ok &= res.stable
        parts.append(f"p={p} C={res.constant:.3f} spread={res.spread:.3f}")
    acceptance_report("C5 prior concentration", ok, "; ".join(parts) + " (spread limit 2)")
    assert ok


def test_c6_laplace_marginal(acceptance_report):
    p = 5
    hp = HyperParams.for_dim(p)
    d = sample_prior_batch(RngStream(6), p, hp, 10**6 // hp.nu)
    z = (np.abs(d.omega) / (d.phi * d.tau[:, None])).ravel()
    N = z.size
    # Exp(1): mean 1, variance 1, fourth central moment 9
    zm = (z.mean() - 1) / math.sqrt(1 / N)
    zv = (z.var(ddof=1) - 1) / math.sqrt(8 / N)
    ok = abs(zm) <= 5 and abs(zv) <= 5
    acceptance_report("C6 Laplace marginal", ok,
                      f"{N} draws, mean z={zm:+.2f}, var z={zv:+.2f} (limit 5 SE)")
    assert ok


def test_c7_end_to_end(acceptance_report, tmp_path):
    t0 = time.time()
    gen, fit, sel = tmp_path / "gen", tmp_path / "fit", tmp_path / "sel"
    codes = [
        main(["generate", "--p", "5", "--s-p", "4", "--n", "200", "--out-dir", str(gen)]),
        main(["fit", "--data", str(gen / "data.csv"), "--iters", "2000", "--burn-in", "1000",
              "--out-dir", str(fit)]),
        main(["select", "--samples", str(fit), "--delta", "0.1", "--cutoff", "0.5",
              "--out", str(sel)]),
        main(["summary", "--samples", str(fit), "--truth", str(gen), "--delta", "0.1",
              "--cutoff", "0.5"]),
    ]
    elapsed = time.time() - t0
    m = read_kv(fit / "metrics.txt")
    mcc = float(m["mcc"])
    ok = codes == [0, 0, 0, 0] and mcc >= 0.8 and elapsed < 120
    acceptance_report("C7 end-to-end recovery", ok,
                      f"MCC={mcc:.3f} (tpr={float(m['tpr']):.2f}, fpr={float(m['fpr']):.2f}), "
                      f"{elapsed:.1f}s (limits MCC>=0.8, 120s)")
    assert ok


def test_c8_error_shrinkage(acceptance_report, tmp_path):
    errs = []
    for n in (50, 200, 800):
        gen, fit = tmp_path / f"gen{n}", tmp_path / f"fit{n}"
        assert main(["generate", "--p", "5", "--s-p", "4", "--n", str(n), "--seed", "0",
                     "--out-dir", str(gen)]) == 0
        assert main(["fit", "--data", str(gen / "data.csv"), "--seed", "0",
                     "--out-dir", str(fit)]) == 0
        assert main(["summary", "--samples", str(fit), "--truth", str(gen)]) == 0
        errs.append(float(read_kv(fit / "metrics.txt")["rel_frobenius_error"]))
    ok = errs[0] > errs[1] > errs[2]
    acceptance_report("C8 error shrinkage", ok,
                      "rel Frobenius error " + " > ".join(f"{e:.4f}" for e in errs)
                      + " at n = 50, 200, 800")
    assert ok


def test_c9_reproducibility(acceptance_report, tmp_path):
    gen = tmp_path / "gen"
    assert main(["generate", "--p", "6", "--s-p", "5", "--n", "100", "--seed", "3",
                 "--out-dir", str(gen)]) == 0
    data = str(gen / "data.csv")
    common = ["--iters", "300", "--burn-in", "100", "--seed", "11", "--chains", "2"]
    runs = {}
    for tag, workers in (("w1a", "1"), ("w1b", "1"), ("w2", "2")):
        out = tmp_path / tag
        assert main(["fit", "--data", data, *common, "--workers", workers,
                     "--out-dir", str(out)]) == 0
        runs[tag] = [(out / rel).read_bytes()
                     for rel in ("draws.bin", "chain_0/draws.bin", "chain_1/draws.bin")]
    same_run = runs["w1a"] == runs["w1b"]
    same_workers = runs["w1a"] == runs["w2"]
    ok = same_run and same_workers
    acceptance_report("C9 reproducibility", ok,
                      f"repeat run identical={same_run}, workers 1 vs 2 identical={same_workers} "
                      f"({len(runs['w1a'][0])} bytes merged draws)")
    assert ok
