import io
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphsumm.graph import InputGraph, Model, Partition, SummaryGraph
from graphsumm.metrics import (
    CSV_COLUMNS,
    MetricsReport,
    ReportRow,
    compression_ratio,
    entropy,
    objective,
    objective_unweighted,
    objective_weighted,
    read_csv,
    reconstruction_error,
    rows_to_csv,
    size_bits,
)

import oracles
from conftest import random_assignment, random_graph


def summary(assign, superedges, model):
    return SummaryGraph(Partition(assign), dict(superedges), Model(model))


def test_reconstruction_error_examples(path3):
    for model in Model:
        ident = SummaryGraph.identity(path3, model)
        assert reconstruction_error(path3, ident, 1) == 0
        assert reconstruction_error(path3, ident, 2) == 0
    s = summary([0, 0, 1], {(0, 0): 1, (0, 1): 1}, "weighted")
    assert reconstruction_error(path3, s, 1) == pytest.approx(1.0)
    assert reconstruction_error(path3, s, 2) == pytest.approx(math.sqrt(0.5))
    with pytest.raises(ValueError):
        reconstruction_error(path3, s, 3)


def test_size_bits_examples():
    # |S|=4, |P|=3, w_max=5, |V|=10
    assign = [0, 0, 0, 1, 1, 2, 2, 3, 3, 3]
    sup = {(0, 0): 3, (0, 1): 5, (2, 3): 1}
    assert size_bits(summary(assign, sup, "weighted")) == pytest.approx(12 + 3 * math.log2(5) + 20)
    assert size_bits(summary(assign, sup, "weighted")) == pytest.approx(38.966, abs=1e-3)
    assert size_bits(summary(assign, sup, "unweighted")) == pytest.approx(32.0)
    for model in Model:
        assert size_bits(summary([0] * 5, {}, model)) == 0.0
        assert size_bits(summary([0] * 5, {(0, 0): 1}, model)) == 0.0
    # a single supernode still pays for the weight field when w_max > 1
    assert size_bits(summary([0] * 5, {(0, 0): 4}, "weighted")) == 2.0
    assert size_bits(summary([0] * 5, {(0, 0): 4}, "unweighted")) == 0.0


def test_size_bits_weight_term_limits():
    # w_max = 1 adds nothing, and no superedges means no weight term at all
    assert size_bits(summary([0, 1], {(0, 1): 1}, "weighted")) == size_bits(summary([0, 1], {(0, 1): 1}, "unweighted"))
    assert size_bits(summary([0, 1], {}, "weighted")) == 2.0


def test_compression_ratio_examples():
    g = InputGraph(10, [(i, j) for i in range(6) for j in range(i + 1, 6)])  # 15 edges
    assign = [0, 0, 0, 1, 1, 2, 2, 3, 3, 3]
    s = summary(assign, {(0, 0): 3, (0, 1): 6, (1, 1): 1}, "unweighted")
    assert size_bits(s) == 32.0
    assert compression_ratio(g, s) == pytest.approx(32 / (30 * math.log2(10)))
    assert compression_ratio(g, s) == pytest.approx(0.3211, abs=1e-4)
    assert compression_ratio(g, summary([0] * 10, {}, "weighted")) == 0.0
    assert compression_ratio(g, SummaryGraph.identity(g, "weighted")) > 1.0


def test_compression_ratio_errors():
    with pytest.raises(ValueError):
        compression_ratio(InputGraph(3, []), summary([0, 1, 2], {}, "weighted"))
    with pytest.raises(ValueError):
        compression_ratio(InputGraph(1, []), summary([0], {}, "weighted"))


def test_entropy_examples():
    assert entropy(0.5) == 1.0
    assert entropy(0.0) == 0.0 and entropy(1.0) == 0.0
    assert entropy(0.25) == pytest.approx(0.8113, abs=1e-4)
    for bad in (-0.1, 1.5):
        with pytest.raises(ValueError):
            entropy(bad)


@given(st.floats(0, 1))
def test_entropy_symmetric(x):
    assert entropy(x) == pytest.approx(entropy(1 - x), abs=1e-12)


def test_objective_examples(path3, triangle):
    for model in Model:
        ident = SummaryGraph.identity(path3, model)
        assert objective(path3, ident) == pytest.approx(size_bits(ident))
        empty = summary([0, 1, 2], {}, model)
        assert objective(path3, empty) == pytest.approx(size_bits(empty) + 2 * 2 * math.log2(3))
    s = summary([0, 0, 1], {(0, 0): 1, (0, 1): 1}, "weighted")
    assert objective_weighted(path3, s) == pytest.approx(size_bits(s) + 2.0)
    t = summary([0, 0, 0], {(0, 0): 3}, "unweighted")
    assert objective_unweighted(triangle, t) == pytest.approx(size_bits(t))


def test_objective_model_mismatch(path3):
    with pytest.raises(ValueError):
        objective_weighted(path3, SummaryGraph.identity(path3, "unweighted"))
    with pytest.raises(ValueError):
        objective_unweighted(path3, SummaryGraph.identity(path3, "weighted"))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 40), st.floats(0.05, 0.9), st.integers(1, 8), st.integers(0, 2**32 - 1))
def test_blockwise_metrics_match_brute_force(n, p, k, seed):
    rng = random.Random(seed)
    g = random_graph(rng, n, p)
    assign = random_assignment(rng, n, k)
    A = oracles.dense_adjacency(n, g.edges())
    E, _ = oracles.block_counts(A, assign)
    sup = {key: e for key, e in E.items() if e > 0 and rng.random() < 0.7}
    for model in Model:
        weighted = model is Model.WEIGHTED
        s = summary(assign, sup, model)
        R = oracles.reconstruct(n, assign, sup, weighted)
        for q in (1, 2):
            assert reconstruction_error(g, s, q) == pytest.approx(oracles.re_p(A, R, q), rel=1e-9, abs=1e-12)
        assert size_bits(s) == pytest.approx(oracles.size_bits(n, len(set(assign)), sup, weighted), rel=1e-12)
        assert objective(g, s) == pytest.approx(oracles.objective(A, assign, sup, weighted), rel=1e-9)


def test_weighted_error_never_below_majority_rule(rng):
    # on one partition the 0/1 majority choice is never worse than fractional weights
    for _ in range(30):
        g = random_graph(rng, 12, 0.4)
        assign = random_assignment(rng, 12, 3)
        A = oracles.dense_adjacency(12, g.edges())
        E, Pi = oracles.block_counts(A, assign)
        w = summary(assign, {k: e for k, e in E.items() if e}, "weighted")
        u = summary(assign, {k: e for k, e in E.items() if 2 * e > Pi[k]}, "unweighted")
        assert reconstruction_error(g, u, 1) <= reconstruction_error(g, w, 1) + 1e-12


# --------------------------------------------------------------------------
# CSV rows


def test_csv_round_trip():
    rep = MetricsReport(1.5, 0.1 + 0.2, 100.0, 1 / 3, 42, pagerank_error=1e-17)
    rows = [
        ReportRow.from_report("toy", "ssumm", "weighted", 0.3, rep, wall_time_ms=12.5),
        ReportRow("toy", "ssumm", "unweighted", 0.1, error="ValueError: too small"),
    ]
    text = rows_to_csv(rows)
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    back = read_csv(io.StringIO(text))
    assert back == rows
    assert rows_to_csv(back) == text


def test_csv_schema_prefix_is_frozen():
    assert CSV_COLUMNS[:11] == ("dataset", "algorithm", "model", "target_ratio", "compression_ratio", "re1", "re2",
                                "reconstructed_edges", "pagerank_error", "rwr_error", "wall_time_ms")
