"""Reconstruction error, bit sizes and the two MDL-style summarization objectives.

All pair sums run over unordered subnode pairs ``i < j``.  Everything is
evaluated blockwise per supernode pair, never by materializing the
reconstructed adjacency.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, fields

from .graph import InputGraph, Model, SummaryGraph, block_edge_counts


def log2_or_zero(x: float) -> float:
    return math.log2(x) if x > 1 else 0.0


def entropy(x: float) -> float:
    """Binary entropy in bits, with ``entropy(0) == entropy(1) == 0``."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"entropy argument {x} outside [0, 1]")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def block_entropy_bits(e: int, pairs: int) -> float:
    """``pairs * entropy(e / pairs)`` without the division, exact for integer counts."""
    if e == 0 or e == pairs:
        return 0.0
    return pairs * math.log2(pairs) - e * math.log2(e) - (pairs - e) * math.log2(pairs - e)


def size_bits(s: SummaryGraph) -> float:
    n_super = s.supernode_count
    n_edges = s.superedge_count
    ls = log2_or_zero(n_super)
    bits = 2 * n_edges * ls + s.node_count * ls
    if s.model is Model.WEIGHTED and n_edges:
        bits += n_edges * log2_or_zero(s.max_count)
    return bits


def input_size_bits(g: InputGraph) -> float:
    """Denominator of the compression ratio: ``2|E| log2 |V|``."""
    return 2 * g.edge_count * log2_or_zero(g.node_count)


def compression_ratio(g: InputGraph, s: SummaryGraph) -> float:
    if g.edge_count < 1 or g.node_count < 2:
        raise ValueError("compression ratio needs |E| >= 1 and |V| >= 2")
    return size_bits(s) / input_size_bits(g)


def _check_pair(g: InputGraph, s: SummaryGraph) -> None:
    if g.node_count != s.node_count:
        raise ValueError(f"graph has {g.node_count} nodes, summary has {s.node_count}")


def reconstruction_error(g: InputGraph, s: SummaryGraph, p: int = 1) -> float:
    """L_p distance between the input and reconstructed adjacency (upper triangle)."""
    if p not in (1, 2):
        raise ValueError(f"unsupported norm order {p}")
    _check_pair(g, s)
    counts = block_edge_counts(g, s.partition)
    total = 0.0
    covered = 0
    for (a, b), _stored in s.superedges.items():
        e = counts.get((a, b), 0)
        covered += e
        w = s.superedge_weight(a, b)
        pairs = s.pairs(a, b)
        if p == 1:
            total += e * abs(1.0 - w) + (pairs - e) * w
        else:
            total += e * (1.0 - w) ** 2 + (pairs - e) * w * w
    # every edge outside a superedge block is reconstructed as 0
    total += g.edge_count - covered
    return total if p == 1 else math.sqrt(total)


def objective_weighted(g: InputGraph, s: SummaryGraph) -> float:
    if s.model is not Model.WEIGHTED:
        raise ValueError("objective_weighted needs a weighted summary")
    _check_pair(g, s)
    counts = block_edge_counts(g, s.partition)
    lv = log2_or_zero(g.node_count)
    total = size_bits(s)
    covered = 0
    for key in s.superedges:
        e = counts.get(key, 0)
        covered += e
        total += block_entropy_bits(e, s.pairs(*key))
    total += 2 * (g.edge_count - covered) * lv
    return total


def objective_unweighted(g: InputGraph, s: SummaryGraph) -> float:
    if s.model is not Model.UNWEIGHTED:
        raise ValueError("objective_unweighted needs an unweighted summary")
    _check_pair(g, s)
    counts = block_edge_counts(g, s.partition)
    lv = log2_or_zero(g.node_count)
    covered = 0
    missing = 0
    for key in s.superedges:
        e = counts.get(key, 0)
        covered += e
        missing += s.pairs(*key) - e
    return size_bits(s) + 2 * missing * lv + 2 * (g.edge_count - covered) * lv


def objective(g: InputGraph, s: SummaryGraph) -> float:
    """The MDL objective matching the summary's model."""
    if s.model is Model.WEIGHTED:
        return objective_weighted(g, s)
    return objective_unweighted(g, s)


# --------------------------------------------------------------------------
# reports


CSV_COLUMNS = (
    "dataset",
    "algorithm",
    "model",
    "target_ratio",
    "compression_ratio",
    "re1",
    "re2",
    "reconstructed_edges",
    "pagerank_error",
    "rwr_error",
    "wall_time_ms",
    "error",
)


@dataclass
class MetricsReport:
    re1: float
    re2: float
    size_bits: float
    compression_ratio: float
    reconstructed_edges: int
    pagerank_error: float | None = None
    rwr_error: float | None = None


@dataclass
class ReportRow:
    """One CSV row; ``error`` is set (and metrics left empty) for failed sweep cells."""

    dataset: str
    algorithm: str
    model: str
    target_ratio: float | None = None
    compression_ratio: float | None = None
    re1: float | None = None
    re2: float | None = None
    reconstructed_edges: int | None = None
    pagerank_error: float | None = None
    rwr_error: float | None = None
    wall_time_ms: float | None = None
    error: str = ""

    @classmethod
    def from_report(cls, dataset, algorithm, model, target_ratio, report: MetricsReport, wall_time_ms=None):
        return cls(
            dataset=dataset,
            algorithm=algorithm,
            model=str(Model(model).value),
            target_ratio=target_ratio,
            compression_ratio=report.compression_ratio,
            re1=report.re1,
            re2=report.re2,
            reconstructed_edges=report.reconstructed_edges,
            pagerank_error=report.pagerank_error,
            rwr_error=report.rwr_error,
            wall_time_ms=wall_time_ms,
        )

    def to_csv_values(self) -> list[str]:
        return [_fmt(v) for v in (getattr(self, c) for c in CSV_COLUMNS)]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(rows, fh, header: bool = True) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    if header:
        writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow(row.to_csv_values())


def rows_to_csv(rows, header: bool = True) -> str:
    buf = io.StringIO()
    write_csv(rows, buf, header=header)
    return buf.getvalue()


_INT_COLS = {"reconstructed_edges"}
_STR_COLS = {"dataset", "algorithm", "model", "error"}


def read_csv(fh) -> list[ReportRow]:
    out = []
    for rec in csv.DictReader(fh):
        kwargs = {}
        for f in fields(ReportRow):
            raw = rec.get(f.name, "")
            if f.name in _STR_COLS:
                kwargs[f.name] = raw
            elif raw == "":
                kwargs[f.name] = None
            elif f.name in _INT_COLS:
                kwargs[f.name] = int(raw)
            else:
                kwargs[f.name] = float(raw)
        out.append(ReportRow(**kwargs))
    return out


def report_dict(report: MetricsReport) -> dict:
    return asdict(report)
