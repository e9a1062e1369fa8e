import numpy as np
import pytest

from dlggm.core import ScatterMatrix
from dlggm.distributions import RngStream
from dlggm.synthetic import TruthSpec, gen_data, gen_precision


@pytest.fixture
def rng():
    return RngStream(12345)


def make_fixture(p, n, s_p=None, seed=0):
    """Random sparse truth, data and scatter for sampler tests."""
    s_p = p if s_p is None else s_p
    truth_rng, data_rng = RngStream(seed).split(2)
    omega, edges = gen_precision(TruthSpec(p=p, n_edges=s_p), truth_rng)
    x = gen_data(omega, n, data_rng)
    x = x - x.mean(axis=0)
    return omega, edges, ScatterMatrix.from_data(x)


def random_pd(gen: np.random.Generator, p: int) -> np.ndarray:
    b = gen.standard_normal((p, p))
    return b @ b.T + p * np.eye(p)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_report(capsys):
    """Record (and echo) one PASS/FAIL line per acceptance criterion."""

    def report(label: str, passed: bool, detail: str) -> bool:
        line = f"[{'PASS' if passed else 'FAIL'}] {label}: {detail}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        return passed

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
