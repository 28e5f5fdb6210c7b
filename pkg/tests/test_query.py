import random

import numpy as np
import pytest

from graphsumm.graph import InputGraph, Model, Partition, SummaryGraph, materialize
from graphsumm.query import (
    SummaryIndex,
    get_neighbors,
    node_importance_error,
    node_proximity_error,
    pack_scores,
    pagerank_exact,
    pagerank_literal,
    pagerank_summary,
    rwr_exact,
    rwr_literal,
    rwr_summary,
    sample_queries,
    format_scores,
    unpack_scores,
)

import oracles
from conftest import random_assignment, random_graph


def summary(assign, superedges, model):
    return SummaryGraph(Partition(assign), dict(superedges), Model(model))


def random_summary(rng, n, p, k, model):
    g = random_graph(rng, n, p)
    assign = random_assignment(rng, n, k)
    A = oracles.dense_adjacency(n, g.edges())
    E, _ = oracles.block_counts(A, assign)
    sup = {key: e for key, e in E.items() if e and rng.random() < 0.7}
    return g, summary(assign, sup, model)


# --------------------------------------------------------------------------
# neighbors


def test_get_neighbors_examples():
    assert get_neighbors(summary([0, 0, 1], {(0, 1): 1}, "weighted"), 0) == [(2, 0.5)]
    assert get_neighbors(summary([0, 0, 1], {(0, 1): 1}, "unweighted"), 0) == [(2, 1.0)]
    nb = get_neighbors(summary([0, 0, 1], {(0, 0): 1}, "unweighted"), 0)
    assert nb == [(1, 1.0)]
    with pytest.raises(IndexError):
        get_neighbors(summary([0], {}, "weighted"), 3)


def test_get_neighbors_matches_materialized_rows():
    rng = random.Random(1)
    for model in Model:
        for _ in range(10):
            _, s = random_summary(rng, rng.randint(2, 60), 0.3, rng.randint(1, 10), model)
            M = materialize(s)
            for u in range(s.node_count):
                row = [(v, float(M[u, v])) for v in np.flatnonzero(M[u] > 0)]
                assert get_neighbors(s, u) == row


# --------------------------------------------------------------------------
# PageRank / RWR examples


def test_pagerank_examples():
    assert pagerank_summary(summary([0], {}, "weighted")).scores.tolist() == [1.0]
    two = InputGraph(2, [(0, 1)])
    ident = SummaryGraph.identity(two, "weighted")
    assert np.allclose(pagerank_summary(ident).scores, [0.5, 0.5], atol=1e-12)
    cyc = InputGraph(3, [(0, 1), (1, 2), (0, 2)])
    assert np.allclose(pagerank_exact(cyc).scores, [1 / 3] * 3, atol=1e-12)
    star = InputGraph(4, [(0, 1), (0, 2), (0, 3)])
    r = pagerank_exact(star).scores
    assert r[0] > r[1] == pytest.approx(r[2]) == pytest.approx(r[3])
    assert r.sum() == pytest.approx(1.0, abs=1e-9)


def test_rwr_examples():
    r = rwr_summary(summary([0], {}, "unweighted"), 0, damping=0.3).scores
    assert r.tolist() == [1.0]
    two = SummaryGraph.identity(InputGraph(2, [(0, 1)]), "unweighted")
    r = rwr_summary(two, 0).scores
    assert r[0] > r[1]
    with pytest.raises(IndexError):
        rwr_summary(two, 2)


@pytest.mark.parametrize("d", [0.0, 1.0, -0.5, 1.5])
def test_damping_range(d):
    s = summary([0, 1], {(0, 1): 1}, "weighted")
    with pytest.raises(ValueError):
        pagerank_summary(s, damping=d)
    with pytest.raises(ValueError):
        rwr_summary(s, 0, damping=d)


def test_non_convergence_flag():
    s = SummaryGraph.identity(random_graph(random.Random(0), 30, 0.2), "weighted")
    res = pagerank_summary(s, tol=1e-300, max_iter=5)
    assert not res.converged and res.iterations == 5


# --------------------------------------------------------------------------
# fast path against the literal sweep and the dense oracle


def test_fast_path_matches_literal_sweep():
    rng = random.Random(7)
    for model in Model:
        for _ in range(12):
            _, s = random_summary(rng, rng.randint(2, 70), rng.uniform(0.05, 0.5), rng.randint(1, 12), model)
            a, b = pagerank_summary(s), pagerank_literal(s)
            assert np.abs(a.scores - b.scores).sum() < 1e-12
            assert a.iterations == b.iterations
            q = rng.randrange(s.node_count)
            a, b = rwr_summary(s, q), rwr_literal(s, q)
            assert np.abs(a.scores - b.scores).sum() < 1e-12


def test_fast_path_matches_dense_oracle():
    rng = random.Random(8)
    for model in Model:
        for _ in range(8):
            _, s = random_summary(rng, rng.randint(2, 50), 0.3, rng.randint(1, 8), model)
            M = materialize(s)
            n = s.node_count
            ref, _ = oracles.power_iteration(M, np.full(n, 1.0 / n), 0.85, 1e-12)
            assert np.abs(pagerank_summary(s, tol=1e-12).scores - ref).sum() < 1e-9


def test_identity_summary_matches_exact_scores():
    rng = random.Random(3)
    for _ in range(5):
        g = random_graph(rng, 80, 0.08)
        for model in Model:
            ident = SummaryGraph.identity(g, model)
            pr = pagerank_summary(ident)
            assert np.abs(pr.scores - pagerank_exact(g).scores).sum() < 1e-6
            assert pr.scores.sum() == pytest.approx(1.0, abs=1e-9)
            assert node_importance_error(g, ident) <= 2e-9
            assert node_proximity_error(g, ident, num_queries=10) <= 2e-9
            assert np.abs(rwr_summary(ident, 5).scores - rwr_exact(g, 5).scores).sum() < 1e-6


def test_rwr_cycle_relabel_invariance():
    n = 12
    cyc = InputGraph(n, [(i, (i + 1) % n) for i in range(n)])
    r = rwr_exact(cyc, 0).scores
    # reflection around the query node maps i to n - i
    for i in range(1, n):
        assert r[i] == pytest.approx(r[n - i], abs=1e-12)
    s = SummaryGraph.identity(cyc, "unweighted")
    assert np.allclose(rwr_summary(s, 0).scores, r, atol=1e-9)


def test_pagerank_sums_to_one_on_lossy_summaries():
    rng = random.Random(10)
    for model in Model:
        for _ in range(10):
            _, s = random_summary(rng, 40, 0.2, 5, model)
            res = pagerank_summary(s)
            assert res.converged
            assert res.scores.sum() == pytest.approx(1.0, abs=1e-9)
            assert (res.scores >= 0).all()


def test_error_of_empty_summary_is_positive():
    g = InputGraph(4, [(0, 1), (2, 3), (1, 2)])
    assert node_importance_error(g, summary([0, 1, 2, 3], {}, "weighted")) > 0


def test_single_supernode_four_cycle_matches_brute_force():
    g = InputGraph(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
    s = summary([0, 0, 0, 0], {(0, 0): 4}, "weighted")
    A = oracles.dense_adjacency(4, g.edges())
    q = np.full(4, 0.25)
    exact, _ = oracles.power_iteration(A, q, 0.85, 1e-12)
    approx, _ = oracles.power_iteration(materialize(s), q, 0.85, 1e-12)
    ref = np.abs(exact - approx).sum()
    assert node_importance_error(g, s, tol=1e-12) == pytest.approx(ref, abs=1e-10)


# --------------------------------------------------------------------------
# query sampling and serialization


def test_sample_queries():
    assert sample_queries(5, 10) == [0, 1, 2, 3, 4]
    assert sample_queries(5, 5) == [0, 1, 2, 3, 4]
    qs = sample_queries(1000, 100, rng_seed=4)
    assert len(set(qs)) == 100 and qs == sample_queries(1000, 100, rng_seed=4)


def test_proximity_error_is_deterministic():
    rng = random.Random(12)
    g, s = random_summary(rng, 60, 0.15, 8, "unweighted")
    a = node_proximity_error(g, s, num_queries=20, rng_seed=1)
    b = node_proximity_error(g, s, num_queries=20, rng_seed=1)
    assert a == b and a > 0
    cache = {}
    c = node_proximity_error(g, s, num_queries=20, rng_seed=1, exact_cache=cache)
    assert c == a and len(cache) == 20


def test_score_formats():
    scores = np.array([0.25, 1 / 3, 0.0])
    blob = pack_scores(scores)
    assert len(blob) == 8 + 24
    assert blob[:8] == (3).to_bytes(8, "little")
    assert np.array_equal(unpack_scores(blob), scores)
    with pytest.raises(ValueError):
        unpack_scores(blob[:-1])
    lines = format_scores(scores).splitlines()
    assert lines[1] == f"1 {1 / 3!r}"
    assert [float(l.split()[1]) for l in lines] == scores.tolist()


def test_summary_index_weight_sums():
    s = summary([0, 0, 1, 1, 1], {(0, 0): 1, (0, 1): 3}, "weighted")
    idx = SummaryIndex(s)
    M = materialize(s)
    # every member's outgoing weight equals its row sum in the dense reconstruction
    for u in range(5):
        assert 1.0 / idx.inv[idx.block[u]] == pytest.approx(M[u].sum())
