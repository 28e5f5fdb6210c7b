"""Evaluation protocol: single runs, metric reports and target-ratio sweeps."""

from __future__ import annotations

import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .batch import RunStats, kgrass_multi, sparsify, ssumm, ssumm_trajectory
from .graph import InputGraph, Model, SummaryGraph, reconstructed_edge_count
from .grouping import GroupingConfig
from .incremental import MossoLossy, insertion_stream, shuffled
from .metrics import MetricsReport, ReportRow, compression_ratio, input_size_bits, reconstruction_error, size_bits
from .query import (
    DEFAULT_TOL,
    PAGERANK_DAMPING,
    RWR_DAMPING,
    node_importance_error,
    node_proximity_error,
    pagerank_exact,
)

log = logging.getLogger(__name__)

ALGORITHMS = ("kgrass", "ssumm", "mosso_lossy")
SWEEP_RATIOS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
MODELS = (Model.WEIGHTED, Model.UNWEIGHTED)
THREADS_ENV = "GRAPHSUMM_THREADS"


class ConfigError(ValueError):
    """Invalid run configuration (reported as a usage error by the CLI)."""


@dataclass
class RunConfig:
    dataset_path: str
    algorithm: str
    model: Model
    target_ratio: float | None = None
    target_supernodes: int | None = None
    iterations: int = 20
    seed: int = 0
    damping: float = PAGERANK_DAMPING
    rwr_damping: float = RWR_DAMPING
    num_queries: int = 100
    tol: float = DEFAULT_TOL
    sample_size: int = 10
    shuffle: bool = False
    out: str | None = None

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; choose from {', '.join(ALGORITHMS)}")
        try:
            self.model = Model(self.model)
        except ValueError:
            raise ConfigError(f"unknown model {self.model!r}") from None
        has_ratio = self.target_ratio is not None
        has_k = self.target_supernodes is not None
        if self.algorithm == "mosso_lossy":
            # MoSSo has no size target; it only stops when the stream ends
            if has_ratio or has_k:
                raise ConfigError("mosso_lossy takes no target; drop --target-ratio/--target-supernodes")
        elif has_ratio == has_k:
            raise ConfigError("give exactly one of --target-ratio / --target-supernodes")
        if self.algorithm == "ssumm" and has_k:
            raise ConfigError("ssumm targets a size in bits; use --target-ratio")
        if has_ratio and not 0.0 < self.target_ratio <= 1.0:
            raise ConfigError(f"--target-ratio {self.target_ratio} outside (0, 1]")
        if has_k and self.target_supernodes < 1:
            raise ConfigError("--target-supernodes must be >= 1")
        if self.iterations < 1:
            raise ConfigError("--iterations must be >= 1")
        for name in ("damping", "rwr_damping"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ConfigError(f"--{name.replace('_', '-')} must lie in (0, 1)")
        if self.num_queries < 1:
            raise ConfigError("--num-queries must be >= 1")
        if not self.tol > 0:
            raise ConfigError("--tol must be positive")


def resolve_threads(value: int | None) -> int:
    """``value`` if given, else ``$GRAPHSUMM_THREADS``, else 1."""
    if value is None:
        raw = os.environ.get(THREADS_ENV, "").strip()
        if not raw:
            return 1
        try:
            value = int(raw)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV}={raw!r} is not an integer") from None
    if value < 1:
        raise ConfigError("thread count must be >= 1")
    return value


def target_bits(g: InputGraph, ratio: float) -> float:
    return ratio * input_size_bits(g)


def target_supernodes(g: InputGraph, ratio: float) -> int:
    return max(1, min(g.node_count, math.ceil(ratio * g.node_count - 1e-9)))


def run_mosso(g: InputGraph, model, seed: int = 0, sample_size: int = 10, shuffle: bool = False,
              audit: bool = False) -> tuple[SummaryGraph, MossoLossy]:
    """Replay the edges of ``g`` as insertions and return the summary in ``g``'s node order.

    Edges arrive in file order when ``g`` was loaded from a file, sorted
    otherwise; ``shuffle`` permutes them with ``seed``.
    """
    order = g.file_order if g.file_order is not None else list(g.edges())
    edges = [(g.labels[u], g.labels[v]) for u, v in order]
    if shuffle:
        edges = shuffled(edges, seed)
    mosso = MossoLossy(model, sample_size=sample_size, rng_seed=seed, audit=audit)
    mosso.run(insertion_stream(edges))
    seen = set(mosso.ids)
    if len(seen) != g.node_count:
        # isolated nodes never appear in an edge stream
        for lab in g.labels:
            if lab not in seen:
                mosso.node(lab)
    return mosso.finalize(labels=list(g.labels)), mosso


def summarize(g: InputGraph, cfg: RunConfig, stats: RunStats | None = None, progress=None) -> SummaryGraph:
    cfg.validate()
    if cfg.algorithm == "ssumm":
        grouping = GroupingConfig(rng_seed=cfg.seed)
        return ssumm(g, target_bits(g, cfg.target_ratio), cfg.model, cfg.iterations, grouping, stats, progress)
    if cfg.algorithm == "kgrass":
        k = cfg.target_supernodes if cfg.target_supernodes is not None else target_supernodes(g, cfg.target_ratio)
        return kgrass_multi(g, [k], cfg.model, stats=stats)[0]
    return run_mosso(g, cfg.model, cfg.seed, cfg.sample_size, cfg.shuffle)[0]


def size_row(g: InputGraph, s: SummaryGraph, dataset: str, algorithm: str, target_ratio=None) -> ReportRow:
    """CSV row with only the size figures filled in."""
    return ReportRow(dataset, algorithm, s.model.value, target_ratio,
                     compression_ratio=compression_ratio(g, s), reconstructed_edges=reconstructed_edge_count(s))


@dataclass
class EvalOptions:
    pagerank: bool = False
    rwr: bool = False
    damping: float = PAGERANK_DAMPING
    rwr_damping: float = RWR_DAMPING
    num_queries: int = 100
    tol: float = DEFAULT_TOL
    seed: int = 0


@dataclass
class ExactCache:
    """Input-graph scores reused across the cells of a sweep."""

    pagerank: object = None
    rwr: dict = field(default_factory=dict)


def evaluate(g: InputGraph, s: SummaryGraph, opts: EvalOptions | None = None,
             cache: ExactCache | None = None) -> MetricsReport:
    opts = opts or EvalOptions()
    if g.node_count != s.node_count:
        raise ValueError(f"summary covers {s.node_count} nodes but the graph has {g.node_count}")
    cache = cache or ExactCache()
    report = MetricsReport(
        re1=reconstruction_error(g, s, 1),
        re2=reconstruction_error(g, s, 2),
        size_bits=size_bits(s),
        compression_ratio=compression_ratio(g, s),
        reconstructed_edges=reconstructed_edge_count(s),
    )
    if opts.pagerank:
        if cache.pagerank is None:
            cache.pagerank = pagerank_exact(g, opts.damping, opts.tol)
        report.pagerank_error = node_importance_error(g, s, opts.damping, opts.tol, exact=cache.pagerank)
    if opts.rwr:
        report.rwr_error = node_proximity_error(g, s, opts.rwr_damping, opts.tol, opts.num_queries,
                                                opts.seed, exact_cache=cache.rwr)
    return report


# --------------------------------------------------------------------------
# sweep


def _ms(t0: float) -> float:
    return round((time.perf_counter() - t0) * 1000.0, 3)


def _sweep_model(g: InputGraph, dataset: str, algorithm: str, model: Model, ratios, iterations: int, seed: int,
                 opts: EvalOptions, timing: bool) -> list[ReportRow]:
    """All rows of one model; one trajectory is shared by every target."""
    cache = ExactCache()
    rows: list[ReportRow] = []

    def row(ratio, s, elapsed):
        try:
            rep = evaluate(g, s, opts, cache)
        except Exception as exc:  # noqa: BLE001 - recorded in the row
            return ReportRow(dataset, algorithm, model.value, ratio, error=f"{type(exc).__name__}: {exc}")
        return ReportRow.from_report(dataset, algorithm, model, ratio, rep, elapsed if timing else None)

    def failed(ratio, exc):
        return ReportRow(dataset, algorithm, model.value, ratio, error=f"{type(exc).__name__}: {exc}")

    if algorithm == "mosso_lossy":
        t0 = time.perf_counter()
        try:
            s, _ = run_mosso(g, model, seed)
        except Exception as exc:  # noqa: BLE001
            return [failed(None, exc)]
        return [row(None, s, _ms(t0))]

    if algorithm == "ssumm":
        t0 = time.perf_counter()
        targets = [target_bits(g, r) for r in ratios]
        try:
            reached, finals = ssumm_trajectory(g, targets, model, iterations, GroupingConfig(rng_seed=seed))
        except Exception as exc:  # noqa: BLE001
            return [failed(r, exc) for r in ratios]
        merge_ms = _ms(t0)
        for i, r in enumerate(ratios):
            t1 = time.perf_counter()
            try:
                s = reached[i] if i in reached else sparsify(g, finals[i], targets[i])
            except Exception as exc:  # noqa: BLE001
                rows.append(failed(r, exc))
                continue
            rows.append(row(r, s, merge_ms + _ms(t1)))
        return rows

    t0 = time.perf_counter()
    ks = [target_supernodes(g, r) for r in ratios]
    try:
        outs = kgrass_multi(g, ks, model)
    except Exception as exc:  # noqa: BLE001
        return [failed(r, exc) for r in ratios]
    elapsed = _ms(t0)
    return [row(r, s, elapsed) for r, s in zip(ratios, outs)]


def _sweep_job(args) -> list[ReportRow]:
    return _sweep_model(*args)


def sweep(g: InputGraph, dataset: str, algorithm: str, ratios=SWEEP_RATIOS, models=MODELS, iterations: int = 20,
          seed: int = 0, opts: EvalOptions | None = None, threads: int = 1, timing: bool = False) -> list[ReportRow]:
    """Rows for every (target, model) cell, in that order.

    Each model runs as one job (its targets share a trajectory); jobs go to a
    process pool of ``threads`` workers.  ``wall_time_ms`` is only filled in
    with ``timing=True`` so that repeated sweeps produce identical CSVs.
    """
    if algorithm not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {algorithm!r}")
    opts = opts or EvalOptions(seed=seed)
    ratios = tuple(float(r) for r in ratios)
    models = [Model(m) for m in models]
    if algorithm == "mosso_lossy":
        ratios = (None,)
    jobs = [(g, dataset, algorithm, m, ratios, iterations, seed, opts, timing) for m in models]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(threads, len(jobs))) as pool:
            per_model = list(pool.map(_sweep_job, jobs))
    else:
        per_model = [_sweep_job(j) for j in jobs]
    rows = []
    for i in range(len(ratios)):
        for rs in per_model:
            rows.append(rs[i])
    return rows
