import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dlggm.core import n_edges
from dlggm.graph import (EdgeSet, InclusionMatrix, default_delta, inclusion, recovery_metrics,
                         select_graph, support_threshold)


def _tridiag(p, v=0.5):
    a = np.eye(p)
    i = np.arange(p - 1)
    a[i, i + 1] = a[i + 1, i] = v
    return a


def test_support_threshold_examples():
    assert len(support_threshold(np.eye(5), 1e-9)) == 0
    band = support_threshold(_tridiag(6), 0.1)
    assert band.sorted() == [(k, k + 1) for k in range(1, 6)]
    assert len(support_threshold(_tridiag(6), 0.6)) == 0
    with pytest.raises(ValueError):
        support_threshold(np.eye(3), 0.0)


def test_default_delta():
    assert default_delta(10, 5) == pytest.approx(0.05)
    assert default_delta(100, 100) == pytest.approx(0.01)
    assert default_delta(20, 5) < default_delta(10, 5)
    with pytest.raises(ValueError):
        default_delta(10, 0)


def test_inclusion_examples():
    draws = np.repeat(_tridiag(4)[None], 7, axis=0)
    inc = inclusion(draws, 0.1)
    assert set(np.unique(inc.freq)) <= {0.0, 1.0}
    assert inc.freq[1] == 0.0  # edge (1,3) is never above delta
    gen = np.random.default_rng(0)
    a = gen.normal(size=(10, 4, 4))
    b = gen.normal(size=(30, 4, 4))
    a, b = a + a.transpose(0, 2, 1), b + b.transpose(0, 2, 1)
    merged = inclusion(a, 0.5).merge(inclusion(b, 0.5))
    np.testing.assert_allclose(merged.freq, inclusion(np.concatenate([a, b]), 0.5).freq, rtol=1e-14)
    assert merged.n_draws == 40
    with pytest.raises(ValueError):
        inclusion(np.empty((0, 3, 3)), 0.1)
    np.testing.assert_array_equal(inc.dense(), inc.dense().T)


def test_select_graph_examples():
    inc = InclusionMatrix(4, np.array([0.9, 0.2, 0.6, 0.0, 0.55, 1.0]))
    assert select_graph(inc).sorted() == [(1, 2), (1, 4), (2, 4), (3, 4)]
    assert select_graph(inc, cutoff=0.99).sorted() == [(3, 4)]
    dense = InclusionMatrix(4, np.array([0.3, 0.4, 0.35, 0.8, 0.9, 0.31]))
    assert len(select_graph(dense, cutoff=0.29)) == n_edges(4)
    assert len(select_graph(dense, cutoff=0.9)) == 0
    sel = select_graph(inc)
    again = select_graph(InclusionMatrix(4, sel.mask().astype(float)))
    assert again == sel
    with pytest.raises(ValueError):
        select_graph(inc, cutoff=1.0)


def test_recovery_metric_examples():
    truth = EdgeSet(4, frozenset({(1, 2), (2, 3)}))
    m = recovery_metrics(truth, truth)
    assert (m.tpr, m.fpr, m.mcc) == (1.0, 0.0, 1.0)
    comp = EdgeSet.from_mask(4, ~truth.mask())
    assert recovery_metrics(comp, truth).tpr == 0.0
    empty = EdgeSet(4, frozenset())
    m = recovery_metrics(empty, empty)
    assert m.mcc == 0.0 and m.tpr == 1.0 and m.fpr == 0.0
    with pytest.raises(ValueError):
        recovery_metrics(EdgeSet(3, frozenset()), empty)
    with pytest.raises(ValueError):
        EdgeSet(3, frozenset({(1, 4)}))


def test_edge_set_mask_round_trip():
    for p in (2, 5, 9):
        gen = np.random.default_rng(p)
        mask = gen.random(n_edges(p)) < 0.4
        np.testing.assert_array_equal(EdgeSet.from_mask(p, mask).mask(), mask)


sym = arrays(float, (5, 5), elements=st.floats(-2, 2)).map(lambda b: (b + b.T) / 2)


@settings(max_examples=50, deadline=None)
@given(sym, st.floats(1e-3, 1.0), st.floats(1e-3, 1.0))
def test_support_threshold_monotone(a, d1, d2):
    lo, hi = sorted((d1, d2))
    assert support_threshold(a, hi).edges <= support_threshold(a, lo).edges


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.05, 1.5))
def test_inclusion_equals_per_draw_average(seed, delta):
    gen = np.random.default_rng(seed)
    d = gen.normal(size=(12, 4, 4))
    d = d + d.transpose(0, 2, 1)
    masks = np.array([support_threshold(x, delta).mask() for x in d], dtype=float)
    np.testing.assert_array_equal(inclusion(d, delta).freq, masks.mean(axis=0))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 8))
def test_recovery_metrics_permutation_equivariant(seed, p):
    gen = np.random.default_rng(seed)
    est = EdgeSet.from_mask(p, gen.random(n_edges(p)) < 0.4)
    truth = EdgeSet.from_mask(p, gen.random(n_edges(p)) < 0.4)
    perm = gen.permutation(p) + 1

    def relabel(es):
        return EdgeSet(p, frozenset(tuple(sorted((int(perm[i - 1]), int(perm[j - 1]))))
                                    for i, j in es.edges))

    assert recovery_metrics(est, truth) == recovery_metrics(relabel(est), relabel(truth))
