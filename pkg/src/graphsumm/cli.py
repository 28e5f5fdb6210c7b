"""``graphsumm`` command line: summarize, evaluate, sweep, stream-replay, query."""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time

from . import __version__
from .batch import RunStats
from .bench import (
    ALGORITHMS,
    SWEEP_RATIOS,
    ConfigError,
    EvalOptions,
    RunConfig,
    evaluate,
    resolve_threads,
    size_row,
    summarize,
    sweep,
)
from .graph import EdgeListError, InputGraph, LoadOptions, Model, SummaryFormatError, load_edge_list, read_summary, write_summary
from .incremental import MossoLossy, StreamFormatError, insertion_stream, parse_stream, shuffled
from .metrics import ReportRow, write_csv
from .query import (
    DEFAULT_TOL,
    PAGERANK_DAMPING,
    RWR_DAMPING,
    format_scores,
    pack_scores,
    pagerank_summary,
    rwr_summary,
)

log = logging.getLogger("graphsumm")

EXIT_USAGE = 2
EXIT_FAILED = 1


def _dataset_name(path: str) -> str:
    base = os.path.basename(path)
    for ext in (".gz", ".txt", ".tsv", ".csv", ".edges", ".el"):
        if base.endswith(ext):
            base = base[: -len(ext)]
    return base


def _open_out(path: str | None, binary: bool = False):
    if path is None or path == "-":
        return (sys.stdout.buffer if binary else sys.stdout), False
    if binary:
        return open(path, "wb"), True
    return open(path, "w", encoding="utf-8", newline="\n"), True


def _write_rows(rows, path: str | None) -> None:
    fh, close = _open_out(path)
    try:
        write_csv(rows, fh)
    finally:
        if close:
            fh.close()


def _load_graph(path: str, max_edges: int | None = None) -> InputGraph:
    g = load_edge_list(path, LoadOptions(max_edges=max_edges))
    st = g.load_stats
    log.info("loaded %s: |V|=%d |E|=%d (%d self-loops, %d duplicates dropped)",
             path, g.node_count, g.edge_count, st.self_loops, st.duplicates)
    return g


# --------------------------------------------------------------------------
# subcommands


def cmd_summarize(args) -> int:
    cfg = RunConfig(
        dataset_path=args.dataset,
        algorithm=args.algorithm,
        model=args.model,
        target_ratio=args.target_ratio,
        target_supernodes=args.target_supernodes,
        iterations=args.iterations,
        seed=args.seed,
        sample_size=args.sample_size,
        shuffle=args.shuffle,
        out=args.out,
    )
    cfg.validate()
    g = _load_graph(cfg.dataset_path, args.max_edges)
    stats = RunStats()
    t0 = time.perf_counter()
    s = summarize(g, cfg, stats=stats, progress=None if args.quiet else sys.stderr)
    log.info("summary: |S|=%d |P|=%d in %.1f s (%d merges)", s.supernode_count, s.superedge_count,
             time.perf_counter() - t0, stats.merges)
    write_summary(s, cfg.out)
    ratio = cfg.target_ratio
    _write_rows([size_row(g, s, _dataset_name(cfg.dataset_path), cfg.algorithm, ratio)], args.csv)
    return 0


def cmd_evaluate(args) -> int:
    g = _load_graph(args.dataset, args.max_edges)
    s = read_summary(args.summary)
    opts = EvalOptions(pagerank=args.pagerank, rwr=args.rwr, damping=args.damping, rwr_damping=args.rwr_damping,
                       num_queries=args.num_queries, tol=args.tol, seed=args.seed)
    report = evaluate(g, s, opts)
    row = ReportRow.from_report(_dataset_name(args.dataset), args.algorithm or "", s.model, args.target_ratio, report)
    _write_rows([row], args.out)
    return 0


def cmd_sweep(args) -> int:
    threads = resolve_threads(args.threads)
    if args.algorithm not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {args.algorithm!r}")
    ratios = SWEEP_RATIOS if args.ratios is None else tuple(args.ratios)
    for r in ratios:
        if not 0.0 < r <= 1.0:
            raise ConfigError(f"target ratio {r} outside (0, 1]")
    models = [Model(args.model)] if args.model else [Model.WEIGHTED, Model.UNWEIGHTED]
    g = _load_graph(args.dataset, args.max_edges)
    opts = EvalOptions(pagerank=args.pagerank, rwr=args.rwr, damping=args.damping, rwr_damping=args.rwr_damping,
                       num_queries=args.num_queries, tol=args.tol, seed=args.seed)
    rows = sweep(g, _dataset_name(args.dataset), args.algorithm, ratios, models, args.iterations, args.seed,
                 opts, threads=threads, timing=args.timing)
    _write_rows(rows, args.out)
    failed = [r for r in rows if r.error]
    for r in failed:
        log.error("cell %s/%s/%s failed: %s", r.algorithm, r.model, r.target_ratio, r.error)
    return EXIT_FAILED if failed else 0


def cmd_stream_replay(args) -> int:
    mosso = MossoLossy(args.model, sample_size=args.sample_size, rng_seed=args.seed, audit=args.audit)
    labels = None
    fh = None
    if args.edge_list:
        g = _load_graph(args.stream, args.max_edges)
        edges = [(g.labels[u], g.labels[v]) for u, v in g.file_order]
        if args.shuffle:
            edges = shuffled(edges, args.seed)
        events = insertion_stream(edges)
        labels = list(g.labels)
    else:
        if args.shuffle:
            raise ConfigError("--shuffle applies to --edge-list input only")
        fh = open(args.stream, encoding="utf-8")
        events = parse_stream(fh)
    t0 = time.perf_counter()
    try:
        mosso.run(events)
    finally:
        if fh is not None:
            fh.close()
    if labels is not None:
        for lab in labels:
            if lab not in mosso.ids:
                mosso.node(lab)
    s = mosso.finalize(labels)
    st = mosso.stats
    log.info("replayed %d events (%d ignored) in %.1f s: %d moves of %d attempts, |S|=%d |P|=%d",
             st.events, st.ignored, time.perf_counter() - t0, st.moves, st.attempts,
             s.supernode_count, s.superedge_count)
    if args.out is None:
        write_summary(s, sys.stdout)
    else:
        write_summary(s, args.out)
    return 0


def cmd_query(args) -> int:
    s = read_summary(args.summary)
    if args.kind == "pagerank":
        if args.node is not None:
            raise ConfigError("pagerank takes no --node")
        res = pagerank_summary(s, args.damping if args.damping is not None else PAGERANK_DAMPING, args.tol)
    else:
        if args.node is None:
            raise ConfigError("rwr needs --node")
        if not 0 <= args.node < s.node_count:
            raise ConfigError(f"--node {args.node} outside 0..{s.node_count - 1}")
        res = rwr_summary(s, args.node, args.damping if args.damping is not None else RWR_DAMPING, args.tol)
    if not res.converged:
        log.warning("power iteration stopped after %d rounds without reaching tol", res.iterations)
    binary = args.format == "binary"
    fh, close = _open_out(args.out, binary=binary)
    try:
        fh.write(pack_scores(res.scores) if binary else format_scores(res.scores))
    finally:
        if close:
            fh.close()
    return 0


# --------------------------------------------------------------------------
# parser


def _ratio(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="graphsumm", description="Weighted / unweighted graph summarization.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log details to stderr")
    p.add_argument("-q", "--quiet", action="store_true", help="no SSumM progress lines on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common_graph(sp):
        sp.add_argument("dataset", help="edge list (one 'u v' pair per line; '#'/'%%' comments; .gz ok)")
        sp.add_argument("--max-edges", type=int, default=None, help="read only the first N distinct edges")

    def eval_flags(sp):
        sp.add_argument("--pagerank", action="store_true", help="also compute the PageRank error")
        sp.add_argument("--rwr", action="store_true", help="also compute the mean RWR error")
        sp.add_argument("--damping", type=float, default=PAGERANK_DAMPING, help="PageRank damping (default 0.85)")
        sp.add_argument("--rwr-damping", type=float, default=RWR_DAMPING, help="RWR damping (default 0.95)")
        sp.add_argument("--num-queries", type=int, default=100, help="RWR query nodes (default 100)")
        sp.add_argument("--tol", type=float, default=DEFAULT_TOL, help="L1 convergence tolerance")

    sp = sub.add_parser("summarize", help="summarize a graph into a SUMM v1 file")
    common_graph(sp)
    sp.add_argument("--algorithm", choices=ALGORITHMS, required=True)
    sp.add_argument("--model", choices=[m.value for m in Model], required=True)
    sp.add_argument("--target-ratio", type=_ratio, default=None, help="budget as a fraction of 2|E|log2|V|")
    sp.add_argument("--target-supernodes", type=int, default=None, help="k for kgrass")
    sp.add_argument("--iterations", type=int, default=20, help="SSumM outer iterations T (default 20)")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--sample-size", type=int, default=10, help="MoSSo neighbor sample size")
    sp.add_argument("--shuffle", action="store_true", help="MoSSo: replay edges in seeded random order")
    sp.add_argument("--out", required=True, help="summary file to write")
    sp.add_argument("--csv", default=None, help="size report CSV (default stdout)")
    sp.set_defaults(func=cmd_summarize)

    sp = sub.add_parser("evaluate", help="metrics of a summary against its input graph")
    common_graph(sp)
    sp.add_argument("summary", help="SUMM v1 file")
    eval_flags(sp)
    sp.add_argument("--seed", type=int, default=0, help="seed for the RWR query sample")
    sp.add_argument("--algorithm", default=None, help="label written to the algorithm column")
    sp.add_argument("--target-ratio", type=_ratio, default=None, help="label written to the target_ratio column")
    sp.add_argument("--out", default=None, help="CSV file (default stdout)")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("sweep", help="summarize and evaluate over target ratios and both models")
    common_graph(sp)
    sp.add_argument("--algorithm", choices=ALGORITHMS, required=True)
    sp.add_argument("--model", choices=[m.value for m in Model], default=None, help="restrict to one model")
    sp.add_argument("--ratios", type=_ratio, nargs="+", default=None, help="target ratios (default 0.1 .. 0.9)")
    sp.add_argument("--iterations", type=int, default=20)
    sp.add_argument("--seed", type=int, default=0)
    eval_flags(sp)
    sp.add_argument("--threads", type=int, default=None, help="worker processes (default $GRAPHSUMM_THREADS or 1)")
    sp.add_argument("--timing", action="store_true", help="fill wall_time_ms (makes output run-dependent)")
    sp.add_argument("--out", default=None, help="CSV file (default stdout)")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("stream-replay", help="run MoSSo-Lossy over an edge stream")
    sp.add_argument("stream", help="'+ u v' / '- u v' lines, or an edge list with --edge-list")
    sp.add_argument("--edge-list", action="store_true", help="treat the input as an edge list of insertions")
    sp.add_argument("--max-edges", type=int, default=None, help="with --edge-list: first N distinct edges")
    sp.add_argument("--shuffle", action="store_true", help="with --edge-list: seeded random order")
    sp.add_argument("--model", choices=[m.value for m in Model], required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--sample-size", type=int, default=10)
    sp.add_argument("--audit", action="store_true", help="re-check the objective after every accepted move")
    sp.add_argument("--out", default=None, help="summary file (default stdout)")
    sp.set_defaults(func=cmd_stream_replay)

    sp = sub.add_parser("query", help="PageRank or RWR scores computed on a summary")
    sp.add_argument("summary", help="SUMM v1 file")
    sp.add_argument("kind", choices=("pagerank", "rwr"))
    sp.add_argument("--node", type=int, default=None, help="RWR query subnode")
    sp.add_argument("--damping", type=float, default=None, help="default 0.85 (pagerank) / 0.95 (rwr)")
    sp.add_argument("--rwr-damping", dest="damping", type=float, help="alias of --damping for rwr")
    sp.add_argument("--tol", type=float, default=DEFAULT_TOL)
    sp.add_argument("--format", choices=("text", "binary"), default="text")
    sp.add_argument("--out", default=None, help="output file (default stdout)")
    sp.set_defaults(func=cmd_query)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as exc:
        parser.error(str(exc))
    except (EdgeListError, SummaryFormatError, StreamFormatError, OSError, ValueError) as exc:
        print(f"graphsumm: error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    return 0


if __name__ == "__main__":
    sys.exit(main())
