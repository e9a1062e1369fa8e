"""Command-line interface: generate, fit, select, summary, validate, replay.

Exit codes: 0 success, 1 validation failure, 2 usage / input / I/O error.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import diagnose, validate_distributions, validate_prior_concentration
from .distributions import RngStream
from .gibbs import ChainConfig, ChainError, ConfigError, PosteriorSamples, run_chains
from .graph import default_delta, inclusion, recovery_metrics, select_graph
from .io import (DataError, FormatError, RunManifest, file_digest, load_csv, read_draws,
                 read_edges_csv, read_matrix_csv, read_trace_csv, scatter, write_data_csv,
                 write_draws, write_edges_csv, write_kv, write_matrix_csv, write_trace_csv)
from .model import A_PRESETS, HyperParams
from .synthetic import TruthSpec, gen_data, gen_precision

EXIT_OK, EXIT_VALIDATION, EXIT_ERROR = 0, 1, 2
DEFAULT_VALIDATE_SEED = 20261016


class Outputs:
    """Tracks files written by a command so they can be removed on failure."""

    def __init__(self, out_dir):
        self.dir = Path(out_dir)
        self.files: list[Path] = []
        self.dirs: list[Path] = []

    def mkdir(self, path: Path) -> Path:
        missing = [d for d in [path, *path.parents] if not d.exists()]
        path.mkdir(parents=True, exist_ok=True)
        self.dirs.extend(reversed(missing))
        return path

    def path(self, name, sub=None) -> Path:
        base = self.dir if sub is None else self.dir / sub
        self.mkdir(base)
        p = base / name
        self.files.append(p)
        return p

    def cleanup(self):
        for f in self.files:
            f.unlink(missing_ok=True)
        for d in reversed(self.dirs):
            try:
                d.rmdir()
            except OSError:
                pass


def _manifest(args, command, started, **kw) -> RunManifest:
    recorded = {k: (str(Path(v).resolve()) if k in _PATH_ARGS and v is not None else v)
                for k, v in vars(args).items() if k != "func"}
    return RunManifest(command=command, args=recorded, version=__version__,
                       duration_s=round(time.time() - started, 3), **kw)


_PATH_ARGS = {"data", "samples", "truth", "out_dir", "out"}


# --- generate ------------------------------------------------------------------------

def cmd_generate(args, out: Outputs) -> int:
    started = time.time()
    spec = TruthSpec(p=args.p, structure=args.structure, bandwidth=args.bandwidth,
                     value=args.value,
                     n_edges=args.s_p if args.s_p is not None else args.p - 1,
                     diag_boost=args.diag_boost if args.diag_boost is not None
                     else (0.0 if args.structure == "banded" else 0.5))
    rng_truth, rng_data = RngStream(args.seed).split(2)
    omega, edges = gen_precision(spec, rng_truth)
    x = gen_data(omega, args.n, rng_data)
    write_matrix_csv(out.path("truth_precision.csv"), omega.dense())
    write_edges_csv(out.path("truth_edges.csv"), edges)
    write_data_csv(out.path("data.csv"), x)
    _manifest(args, "generate", started, seed=args.seed).write(out.path("manifest.json"))
    print(f"wrote p={args.p} n={args.n} truth with {len(edges)} edges to {out.dir}")
    return EXIT_OK


# --- fit -------------------------------------------------------------------------------

def cmd_fit(args, out: Outputs) -> int:
    started = time.time()
    ds = load_csv(args.data)
    S = scatter(ds)
    hp = HyperParams.for_dim(ds.p, a=args.a, preset=args.a_preset)
    cfg = ChainConfig(n_iter=args.iters, burn_in=args.burn_in, thin=args.thin, seed=args.seed,
                      hp=hp, scan=args.scan, inverse=args.inverse)
    chains = run_chains(cfg, S, n_chains=args.chains, workers=args.workers)
    if len(chains) == 1:
        write_draws(out.path("draws.bin"), chains[0].draws)
        write_trace_csv(out.path("logpost.csv"), chains[0])
    else:
        for k, ch in enumerate(chains):
            write_draws(out.path("draws.bin", f"chain_{k}"), ch.draws)
            write_trace_csv(out.path("logpost.csv", f"chain_{k}"), ch)
        write_draws(out.path("draws.bin"), np.concatenate([c.draws for c in chains]))
        write_kv(out.path("summary.txt"), diagnose(chains, seed=args.seed).to_kv())
    _manifest(args, "fit", started, seed=args.seed, inputs={"data": file_digest(args.data)},
              extra={"a": hp.a, "nu": hp.nu, "omega_floor": hp.omega_floor, "n": ds.n,
                     "p": ds.p, "centering": [float(m) for m in ds.means]}
              ).write(out.path("manifest.json"))
    print(f"fit {args.chains} chain(s): {sum(len(c) for c in chains)} stored draws -> {out.dir}")
    return EXIT_OK


# --- loading samples --------------------------------------------------------------------

def _chain_from_dir(d: Path, draws_path: Path) -> PosteriorSamples:
    draws = read_draws(draws_path)
    trace_path = d / "logpost.csv"
    if trace_path.exists():
        tr = read_trace_csv(trace_path)
        return PosteriorSamples(draws, tr["log_post"], tr["latent_trace"], tr["pd_ok"], tr["kept"])
    k = draws.shape[0]
    return PosteriorSamples(draws, np.full(k, np.nan), np.full((k, 5), np.nan),
                            np.ones(k, bool), np.arange(1, k + 1))


def _load_samples(path) -> list[PosteriorSamples]:
    """Chains from a fit output directory or a draws.bin file."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"{path}: no such file or directory")
    root = path if path.is_dir() else path.parent
    chain_dirs = sorted(root.glob("chain_*"), key=lambda d: int(d.name.split("_")[1]))
    if chain_dirs and (path.is_dir() or path.name == "draws.bin"):
        return [_chain_from_dir(d, d / "draws.bin") for d in chain_dirs]
    return [_chain_from_dir(root, path / "draws.bin" if path.is_dir() else path)]


def _digests(samples) -> dict:
    path = Path(samples)
    files = sorted(path.rglob("draws.bin")) if path.is_dir() else [path]
    return {str(f.resolve()): file_digest(f) for f in files}


def _all_draws(chains) -> np.ndarray:
    return np.concatenate([c.draws for c in chains])


def _delta(args, p, truth_size=None) -> float | None:
    if args.delta is not None:
        return args.delta
    if args.s_guess is not None:
        return default_delta(p, args.s_guess)
    if truth_size:
        return default_delta(p, truth_size)
    return None


def _truth_paths(truth):
    t = Path(truth)
    if t.is_dir():
        return t / "truth_edges.csv", t / "truth_precision.csv"
    sib = t.parent / "truth_precision.csv"
    return t, sib


# --- select ------------------------------------------------------------------------------

def cmd_select(args, out: Outputs) -> int:
    started = time.time()
    chains = _load_samples(args.samples)
    draws = _all_draws(chains)
    p = draws.shape[1]
    delta = _delta(args, p)
    incl = inclusion(draws, delta)
    edges = select_graph(incl, args.cutoff)
    write_matrix_csv(out.path("inclusion.csv"), incl.dense())
    write_edges_csv(out.path("edges.csv"), edges)
    _manifest(args, "select", started, inputs=_digests(args.samples),
              extra={"delta": delta}).write(out.path("manifest.json"))
    print(f"delta={delta:g} cutoff={args.cutoff:g}: {len(edges)} edges selected")
    return EXIT_OK


# --- summary -----------------------------------------------------------------------------

def cmd_summary(args, out: Outputs) -> int:
    started = time.time()
    chains = _load_samples(args.samples)
    draws = _all_draws(chains)
    p = draws.shape[1]
    mean = draws.mean(axis=0)
    write_matrix_csv(out.path("posterior_mean.csv"), mean)
    report = diagnose(chains, seed=args.seed)
    kv = report.to_kv()
    write_kv(out.path("diagnostics.txt"), kv)
    lines = [f"{k}={v}" for k, v in kv.items()]
    if args.truth is not None:
        edges_path, prec_path = _truth_paths(args.truth)
        truth = read_edges_csv(edges_path, p)
        delta = _delta(args, p, truth_size=max(len(truth), 1))
        est = select_graph(inclusion(draws, delta), args.cutoff)
        m = recovery_metrics(est, truth)
        metrics = {"delta": delta, "cutoff": args.cutoff, "tpr": m.tpr, "fpr": m.fpr,
                   "mcc": m.mcc, "tp": m.tp, "fp": m.fp, "tn": m.tn, "fn": m.fn}
        if prec_path.exists():
            om0 = read_matrix_csv(prec_path)
            metrics["rel_frobenius_error"] = float(np.linalg.norm(mean - om0) / np.linalg.norm(om0))
        write_kv(out.path("metrics.txt"), metrics)
        lines += [f"{k}={v}" for k, v in metrics.items()]
    # shares a directory with fit output, hence its own manifest name
    _manifest(args, "summary", started, inputs=_digests(args.samples)).write(
        out.path("summary_manifest.json"))
    print("\n".join(lines))
    return EXIT_OK


# --- validate ----------------------------------------------------------------------------

def cmd_validate(args, out: Outputs | None) -> int:
    rng = RngStream(args.seed)
    r1, r2 = rng.split(2)
    report = validate_distributions(r1)
    report.extend(validate_prior_concentration(r2))
    print("\n".join(report.lines()))
    print(f"{sum(c.passed for c in report.checks)}/{len(report.checks)} checks passed")
    if out is not None and args.out is not None:
        write_kv(out.path(Path(args.out).name), report.to_kv())
    return EXIT_OK if report.passed else EXIT_VALIDATION


# --- replay ----------------------------------------------------------------------------

def cmd_replay(args, out) -> int:
    man = RunManifest.read(args.manifest)
    recorded = dict(man.args)
    recorded.pop("command", None)
    if args.out_dir is not None:
        recorded["out" if man.command == "select" else "out_dir"] = args.out_dir
    argv = [man.command]
    for dest, val in recorded.items():
        if val is not None:
            argv += ["--" + dest.replace("_", "-"), str(val)]
    return main(argv)


# --- parser --------------------------------------------------------------------------------

def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _unit_open(text):
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError(f"expected a value in (0, 1), got {text}")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _add_delta(p, required):
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--delta", type=_positive_float, help="absolute threshold on |omega_ij|")
    g.add_argument("--s-guess", type=_positive_int, help="guessed edge count s; delta = s/p^2")
    p.add_argument("--cutoff", type=_unit_open, default=0.5, help="inclusion-frequency cutoff")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dlggm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"dlggm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="simulate a sparse truth and data")
    g.add_argument("--p", type=_positive_int, required=True)
    g.add_argument("--n", type=_positive_int, required=True)
    g.add_argument("--structure", choices=("random", "banded"), default="random")
    g.add_argument("--s-p", type=int, default=None, help="edge count for random structure")
    g.add_argument("--bandwidth", type=int, default=1)
    g.add_argument("--value", type=float, default=0.5, help="banded off-diagonal value")
    g.add_argument("--diag-boost", type=float, default=None)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out-dir", required=True)
    g.set_defaults(func=cmd_generate)

    f = sub.add_parser("fit", help="run the Gibbs sampler")
    f.add_argument("--data", required=True)
    f.add_argument("--iters", type=_positive_int, default=2000)
    f.add_argument("--burn-in", type=int, default=1000)
    f.add_argument("--thin", type=_positive_int, default=1)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--a", type=_positive_float, default=None, help="Dirichlet concentration")
    f.add_argument("--a-preset", choices=A_PRESETS, default="inv_p2")
    f.add_argument("--chains", type=_positive_int, default=1)
    f.add_argument("--workers", type=_positive_int, default=1)
    f.add_argument("--scan", choices=("systematic", "random"), default="systematic")
    f.add_argument("--inverse", choices=("direct", "downdate"), default="direct")
    f.add_argument("--out-dir", required=True)
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("select", help="threshold draws into a graph")
    s.add_argument("--samples", required=True, help="draws.bin or a fit output directory")
    _add_delta(s, required=True)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_select)

    m = sub.add_parser("summary", help="posterior mean, diagnostics, recovery metrics")
    m.add_argument("--samples", required=True)
    m.add_argument("--truth", default=None, help="truth_edges.csv or a generate output directory")
    _add_delta(m, required=False)
    m.add_argument("--seed", type=int, default=0, help="seed for picking traced entries")
    m.add_argument("--out-dir", default=None)
    m.set_defaults(func=cmd_summary)

    v = sub.add_parser("validate", help="run the statistical self-checks")
    v.add_argument("--seed", type=int, default=DEFAULT_VALIDATE_SEED)
    v.add_argument("--out", default=None, help="write a key=value report here")
    v.set_defaults(func=cmd_validate)

    r = sub.add_parser("replay", help="re-run a command from its manifest.json")
    r.add_argument("manifest")
    r.add_argument("--out-dir", default=None)
    r.set_defaults(func=cmd_replay)
    return parser


def _out_dir(args):
    if args.command == "summary":
        if args.out_dir is not None:
            return args.out_dir
        s = Path(args.samples)
        return s if s.is_dir() else s.parent
    if args.command == "select":
        return args.out
    if args.command == "validate":
        return Path(args.out).parent if args.out else None
    return getattr(args, "out_dir", None)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "replay":
        return args.func(args, None)
    target = _out_dir(args)
    out = Outputs(target) if target is not None else None
    try:
        return args.func(args, out)
    except (OSError, DataError, FormatError, ConfigError, ChainError, ValueError) as exc:
        if out is not None:
            out.cleanup()
        print(f"dlggm {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
