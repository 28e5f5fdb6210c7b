import io
import math
import random

import numpy as np
import pytest

from graphsumm.bench import (
    ConfigError,
    EvalOptions,
    RunConfig,
    evaluate,
    resolve_threads,
    sweep,
    target_supernodes,
)
from graphsumm.cli import main
from graphsumm.graph import InputGraph, Model, Partition, SummaryGraph, load_edge_list, read_summary, write_summary
from graphsumm.metrics import compression_ratio, read_csv, reconstruction_error
from graphsumm.query import unpack_scores

from conftest import random_graph


@pytest.fixture
def edge_file(tmp_path):
    rng = random.Random(21)
    g = random_graph(rng, 60, 0.12)
    path = tmp_path / "toy.txt"
    # labels offset by 100 so that densification is exercised
    path.write_text("# toy\n" + "".join(f"{u + 100} {v + 100}\n" for u, v in sorted(g.edges())))
    return path


def run(argv, capsys):
    try:
        code = main([str(a) for a in argv])
    except SystemExit as exc:
        code = exc.code
    out = capsys.readouterr()
    return code, out.out, out.err


# --------------------------------------------------------------------------
# configuration


def test_run_config_validation():
    RunConfig("x", "ssumm", "weighted", target_ratio=0.5).validate()
    RunConfig("x", "kgrass", "unweighted", target_supernodes=3).validate()
    RunConfig("x", "mosso_lossy", "unweighted").validate()
    bad = [
        RunConfig("x", "ssumm", "weighted"),
        RunConfig("x", "ssumm", "weighted", target_ratio=0.5, target_supernodes=3),
        RunConfig("x", "ssumm", "weighted", target_supernodes=3),
        RunConfig("x", "ssumm", "weighted", target_ratio=1.5),
        RunConfig("x", "ssumm", "weighted", target_ratio=0.0),
        RunConfig("x", "mosso_lossy", "weighted", target_ratio=0.5),
        RunConfig("x", "kgrass", "purple", target_supernodes=3),
        RunConfig("x", "quux", "weighted", target_ratio=0.5),
        RunConfig("x", "ssumm", "weighted", target_ratio=0.5, iterations=0),
        RunConfig("x", "ssumm", "weighted", target_ratio=0.5, damping=1.0),
    ]
    for cfg in bad:
        with pytest.raises(ConfigError):
            cfg.validate()


def test_resolve_threads(monkeypatch):
    monkeypatch.delenv("GRAPHSUMM_THREADS", raising=False)
    assert resolve_threads(None) == 1
    monkeypatch.setenv("GRAPHSUMM_THREADS", "3")
    assert resolve_threads(None) == 3
    assert resolve_threads(2) == 2
    with pytest.raises(ConfigError):
        resolve_threads(0)
    monkeypatch.setenv("GRAPHSUMM_THREADS", "many")
    with pytest.raises(ConfigError):
        resolve_threads(None)


def test_kgrass_ratio_conversion(path3):
    assert target_supernodes(path3, 0.5) == 2
    assert target_supernodes(path3, 0.01) == 1
    assert target_supernodes(path3, 1.0) == 3


# --------------------------------------------------------------------------
# evaluation


def test_evaluate_examples(triangle):
    ident = SummaryGraph.identity(triangle, "weighted")
    rep = evaluate(triangle, ident, EvalOptions(pagerank=True, rwr=True, num_queries=3))
    assert rep.re1 == rep.re2 == 0
    assert rep.reconstructed_edges == 3
    assert rep.pagerank_error <= 2e-9 and rep.rwr_error <= 2e-9
    empty = SummaryGraph(Partition([0, 0, 0]), {}, Model.UNWEIGHTED)
    rep = evaluate(triangle, empty)
    assert rep.re1 == 3 and rep.pagerank_error is None
    with pytest.raises(ValueError):
        evaluate(triangle, SummaryGraph(Partition([0, 0]), {}, Model.UNWEIGHTED))


def test_sweep_protocol_rows():
    g = random_graph(random.Random(5), 70, 0.1)
    rows = sweep(g, "toy", "ssumm", iterations=5)
    assert len(rows) == 18
    assert [(r.target_ratio, r.model) for r in rows] == [(t, m) for t in (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
                                                          for m in ("weighted", "unweighted")]
    for r in rows:
        assert not r.error
        assert r.compression_ratio <= r.target_ratio + 1e-12
        assert r.wall_time_ms is None
    krows = sweep(g, "toy", "kgrass", ratios=(0.3, 0.6))
    assert len(krows) == 4 and all(not r.error for r in krows)
    mrows = sweep(g, "toy", "mosso_lossy")
    assert [(r.target_ratio, r.model) for r in mrows] == [(None, "weighted"), (None, "unweighted")]


def test_sweep_records_cell_failures():
    # 2000-node cap: kgrass refuses, the sweep reports both cells instead of stopping
    g = InputGraph(2100, [(i, i + 1) for i in range(2099)])
    rows = sweep(g, "line", "kgrass", ratios=(0.5,))
    assert len(rows) == 2 and all("refusing" in r.error for r in rows)


def test_parallel_sweep_matches_serial():
    g = random_graph(random.Random(9), 50, 0.1)
    a = sweep(g, "toy", "ssumm", ratios=(0.3, 0.6), iterations=4, threads=1)
    b = sweep(g, "toy", "ssumm", ratios=(0.3, 0.6), iterations=4, threads=2)
    assert a == b


# --------------------------------------------------------------------------
# command line


def test_cli_summarize_kgrass_identity(edge_file, tmp_path, capsys):
    g = load_edge_list(edge_file)
    out = tmp_path / "id.summ"
    code, csv_text, _ = run(["summarize", edge_file, "--algorithm", "kgrass", "--model", "unweighted",
                             "--target-supernodes", g.node_count, "--out", out], capsys)
    assert code == 0
    s = read_summary(out)
    assert s.supernode_count == g.node_count
    assert reconstruction_error(g, s, 1) == 0
    row = read_csv(io.StringIO(csv_text))[0]
    assert row.dataset == "toy" and row.reconstructed_edges == g.edge_count


def test_cli_summarize_ssumm_meets_ratio(edge_file, tmp_path, capsys):
    out = tmp_path / "s.summ"
    code, csv_text, err = run(["summarize", edge_file, "--algorithm", "ssumm", "--model", "weighted",
                               "--target-ratio", 0.5, "--iterations", 5, "--out", out], capsys)
    assert code == 0
    assert "iter=" in err
    g = load_edge_list(edge_file)
    s = read_summary(out)
    assert compression_ratio(g, s) <= 0.5
    row = read_csv(io.StringIO(csv_text))[0]
    assert row.compression_ratio == pytest.approx(compression_ratio(g, s), abs=1e-9)


def test_cli_quiet_suppresses_progress(edge_file, tmp_path, capsys):
    code, _, err = run(["-q", "summarize", edge_file, "--algorithm", "ssumm", "--model", "weighted",
                        "--target-ratio", 0.5, "--iterations", 3, "--out", tmp_path / "s.summ"], capsys)
    assert code == 0 and "iter=" not in err


def test_cli_mosso_shuffled_is_reproducible(edge_file, tmp_path, capsys):
    outs = []
    for i in range(2):
        out = tmp_path / f"m{i}.summ"
        code, _, _ = run(["summarize", edge_file, "--algorithm", "mosso_lossy", "--model", "unweighted",
                          "--shuffle", "--seed", 4, "--out", out], capsys)
        assert code == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_cli_usage_errors(edge_file, tmp_path, capsys):
    argv = ["summarize", edge_file, "--algorithm", "ssumm", "--model", "weighted", "--out", tmp_path / "x"]
    with pytest.raises(SystemExit) as exc:
        main([str(a) for a in argv])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main([str(a) for a in argv + ["--target-ratio", "2"]])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
    capsys.readouterr()


def test_cli_io_errors(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("0 1\nx y\n")
    code, _, err = run(["summarize", bad, "--algorithm", "ssumm", "--model", "weighted", "--target-ratio", 0.5,
                        "--out", tmp_path / "o"], capsys)
    assert code == 1 and "line 2" in err
    code, _, err = run(["query", tmp_path / "missing.summ", "pagerank"], capsys)
    assert code == 1


def test_cli_evaluate(edge_file, tmp_path, capsys):
    g = load_edge_list(edge_file)
    path = tmp_path / "one.summ"
    write_summary(SummaryGraph(Partition([0] * g.node_count), {}, Model.WEIGHTED), path)
    code, text, _ = run(["evaluate", edge_file, path, "--pagerank", "--rwr", "--num-queries", 5,
                         "--algorithm", "manual", "--target-ratio", 0.2], capsys)
    assert code == 0
    row = read_csv(io.StringIO(text))[0]
    assert row.re1 == g.edge_count and row.re2 == pytest.approx(math.sqrt(g.edge_count))
    assert row.reconstructed_edges == 0 and row.pagerank_error > 0 and row.rwr_error > 0
    assert (row.algorithm, row.model, row.target_ratio) == ("manual", "weighted", 0.2)
    # mismatched |V|
    small = tmp_path / "small.summ"
    write_summary(SummaryGraph(Partition([0, 0]), {}, Model.WEIGHTED), small)
    code, _, err = run(["evaluate", edge_file, small], capsys)
    assert code == 1 and "2 nodes" in err


def test_cli_sweep_exit_codes(edge_file, tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    code, _, _ = run(["-q", "sweep", edge_file, "--algorithm", "ssumm", "--iterations", 3, "--out", out], capsys)
    assert code == 0
    rows = read_csv(open(out))
    assert len(rows) == 18
    code, _, _ = run(["sweep", edge_file, "--algorithm", "ssumm", "--ratios", 0.5, 1.5], capsys)
    assert code == 2


def test_cli_sweep_failure_exit_code(tmp_path, capsys):
    path = tmp_path / "line.txt"
    path.write_text("".join(f"{i} {i + 1}\n" for i in range(2100)))
    code, text, _ = run(["sweep", path, "--algorithm", "kgrass", "--ratios", 0.5, "--model", "weighted"], capsys)
    assert code == 1
    rows = read_csv(io.StringIO(text))
    assert len(rows) == 1 and rows[0].error


def test_cli_stream_replay(tmp_path, capsys):
    stream = tmp_path / "s.txt"
    stream.write_text("+ 0 1\n+ 1 2\n+ 0 2\n- 0 2\n- 5 6\n+ 2 3\n")
    out = tmp_path / "r.summ"
    code, _, _ = run(["stream-replay", stream, "--model", "weighted", "--audit", "--out", out], capsys)
    assert code == 0
    s = read_summary(out)
    s.validate(InputGraph(4, [(0, 1), (1, 2), (2, 3)]))
    code, text, _ = run(["stream-replay", stream, "--model", "unweighted"], capsys)
    assert code == 0 and text.startswith("SUMM v1 unweighted 4 ")
    code, _, _ = run(["stream-replay", stream, "--model", "unweighted", "--shuffle"], capsys)
    assert code == 2
    stream.write_text("+ 0 1\n+ 1\n")
    code, _, err = run(["stream-replay", stream, "--model", "unweighted"], capsys)
    assert code == 1 and "line 2" in err


def test_cli_stream_replay_edge_list_matches_summarize(edge_file, tmp_path, capsys):
    a, b = tmp_path / "a.summ", tmp_path / "b.summ"
    run(["stream-replay", edge_file, "--edge-list", "--model", "weighted", "--seed", 2, "--out", a], capsys)
    run(["summarize", edge_file, "--algorithm", "mosso_lossy", "--model", "weighted", "--seed", 2, "--out", b], capsys)
    assert a.read_bytes() == b.read_bytes()


def test_cli_query(edge_file, tmp_path, capsys):
    g = load_edge_list(edge_file)
    path = tmp_path / "id.summ"
    write_summary(SummaryGraph.identity(g, "weighted"), path)
    code, text, _ = run(["query", path, "pagerank"], capsys)
    assert code == 0
    scores = [float(line.split()[1]) for line in text.splitlines()]
    assert len(scores) == g.node_count and sum(scores) == pytest.approx(1.0, abs=1e-9)
    blob = tmp_path / "r.bin"
    code, _, _ = run(["query", path, "rwr", "--node", 3, "--format", "binary", "--out", blob], capsys)
    assert code == 0
    r = unpack_scores(blob.read_bytes())
    assert len(r) == g.node_count and int(np.argmax(r)) == 3
    assert run(["query", path, "rwr"], capsys)[0] == 2
    assert run(["query", path, "rwr", "--node", 10 ** 6], capsys)[0] == 2
    assert run(["query", path, "pagerank", "--node", 1], capsys)[0] == 2


def test_cli_csv_is_recomputable_from_summary(edge_file, tmp_path, capsys):
    g = load_edge_list(edge_file)
    for algo, extra in (("kgrass", ["--target-ratio", "0.4"]), ("ssumm", ["--target-ratio", "0.3"]),
                        ("mosso_lossy", [])):
        out = tmp_path / f"{algo}.summ"
        code, text, _ = run(["-q", "summarize", edge_file, "--algorithm", algo, "--model", "unweighted",
                             *extra, "--out", out], capsys)
        assert code == 0
        row = read_csv(io.StringIO(text))[0]
        assert row.compression_ratio == pytest.approx(compression_ratio(g, read_summary(out)), abs=1e-9)
