"""Weighted and unweighted graph summarization with queries on summary graphs."""

from .batch import kgrass, kgrass_multi, merge_delta, sparsify, ssumm, ssumm_multi
from .blocks import BlockState, Loss
from .graph import (
    InputGraph,
    Model,
    Partition,
    SummaryGraph,
    load_edge_list,
    materialize,
    pair_stats,
    read_summary,
    reconstructed_edge_count,
    reconstructed_weight,
    write_summary,
)
from .grouping import GroupingConfig, group_supernodes
from .incremental import MossoLossy, StreamEvent, parse_stream
from .metrics import (
    compression_ratio,
    entropy,
    objective_unweighted,
    objective_weighted,
    reconstruction_error,
    size_bits,
)
from .query import (
    get_neighbors,
    node_importance_error,
    node_proximity_error,
    pagerank_exact,
    pagerank_summary,
    rwr_exact,
    rwr_summary,
)

__version__ = "0.1.0"
