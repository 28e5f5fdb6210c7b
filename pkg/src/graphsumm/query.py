"""Neighborhood, PageRank and RWR queries answered on a summary graph.

The iteration follows the summary-graph PageRank sweep: every node spreads its
score over its approximate neighbors in proportion to their weights, then

    r_new <- d * r_new + (1 - d * sum(r_new)) * q

with ``q`` uniform (PageRank) or the query indicator (RWR).  Iteration stops
once the L1 change drops below ``tol``.

:func:`pagerank_summary` runs the sweep at supernode granularity in
O(|P| + |V|); :func:`pagerank_literal` runs it node by node through
:func:`get_neighbors` and exists to check the fast path.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .graph import InputGraph, Model, SummaryGraph

DEFAULT_TOL = 1e-9
DEFAULT_MAX_ITER = 10_000
PAGERANK_DAMPING = 0.85
RWR_DAMPING = 0.95


@dataclass
class ScoreVector:
    scores: np.ndarray
    converged: bool
    iterations: int

    def __len__(self) -> int:
        return len(self.scores)


def get_neighbors(s: SummaryGraph, u: int) -> list[tuple[int, float]]:
    """Approximate neighbors of subnode ``u`` with their reconstructed weights."""
    if not 0 <= u < s.node_count:
        raise IndexError(f"unknown subnode {u}")
    su = s.partition.assignment[u]
    out: list[tuple[int, float]] = []
    for a in s.incident(su):
        w = s.superedge_weight(a, su)
        for v in sorted(s.partition.members_of(a)):
            if v != u:
                out.append((v, w))
    out.sort()
    return out


def _check(damping: float) -> None:
    if not 0.0 < damping < 1.0:
        raise ValueError(f"damping factor {damping} outside (0, 1)")


def _restart(n: int, query: int | None) -> np.ndarray:
    if query is None:
        return np.full(n, 1.0 / n)
    if not 0 <= query < n:
        raise IndexError(f"unknown query node {query}")
    q = np.zeros(n)
    q[query] = 1.0
    return q


def _iterate(spread, n: int, q: np.ndarray, damping: float, tol: float, max_iter: int) -> ScoreVector:
    r_new = np.full(n, 1.0 / n)
    for it in range(1, max_iter + 1):
        r_old = r_new
        r_new = spread(r_old)
        r_new = damping * r_new + (1.0 - damping * r_new.sum()) * q
        if np.abs(r_new - r_old).sum() < tol:
            return ScoreVector(r_new, True, it)
    return ScoreVector(r_new, False, max_iter)


# --------------------------------------------------------------------------
# summary side


class SummaryIndex:
    """Supernode-level arrays for the blockwise sweep."""

    def __init__(self, s: SummaryGraph):
        sids = s.partition.supernodes()
        pos = {sid: k for k, sid in enumerate(sids)}
        self.n = s.node_count
        self.block = np.fromiter((pos[x] for x in s.partition.assignment), dtype=np.int64, count=self.n)
        sizes = np.array([s.partition.size(x) for x in sids], dtype=np.float64)
        rows, cols, vals = [], [], []
        self_w = np.zeros(len(sids))
        for a, b in s.superedges:
            w = s.superedge_weight(a, b)
            i, j = pos[a], pos[b]
            if i == j:
                self_w[i] = w
                rows.append(i)
                cols.append(i)
                vals.append(w)
            else:
                rows += [i, j]
                cols += [j, i]
                vals += [w, w]
        k = len(sids)
        self.W = sparse.csr_matrix((vals, (rows, cols)), shape=(k, k))
        self.self_w = self_w
        # weight sum seen by any member of a supernode; self-block excludes the node itself
        wsum = self.W @ sizes - self_w
        self.inv = np.divide(1.0, wsum, out=np.zeros_like(wsum), where=wsum > 0)

    def spread(self, r: np.ndarray) -> np.ndarray:
        mass = np.bincount(self.block, weights=r, minlength=len(self.inv))
        incoming = self.W @ (self.inv * mass)
        b = self.block
        return incoming[b] - (self.self_w * self.inv)[b] * r


def pagerank_summary(s: SummaryGraph, damping: float = PAGERANK_DAMPING, tol: float = DEFAULT_TOL,
                     max_iter: int = DEFAULT_MAX_ITER, index: SummaryIndex | None = None) -> ScoreVector:
    _check(damping)
    index = index or SummaryIndex(s)
    return _iterate(index.spread, index.n, _restart(index.n, None), damping, tol, max_iter)


def rwr_summary(s: SummaryGraph, query: int, damping: float = RWR_DAMPING, tol: float = DEFAULT_TOL,
                max_iter: int = DEFAULT_MAX_ITER, index: SummaryIndex | None = None) -> ScoreVector:
    _check(damping)
    index = index or SummaryIndex(s)
    return _iterate(index.spread, index.n, _restart(index.n, query), damping, tol, max_iter)


def _literal(s: SummaryGraph, q: np.ndarray, damping: float, tol: float, max_iter: int) -> ScoreVector:
    n = s.node_count
    nbr_lists = [get_neighbors(s, v) for v in range(n)]

    def spread(r_old):
        r_new = np.zeros(n)
        for v, nbrs in enumerate(nbr_lists):
            w_sum = sum(w for _, w in nbrs)
            for l, w in nbrs:
                r_new[l] += w / w_sum * r_old[v]
        return r_new

    return _iterate(spread, n, q, damping, tol, max_iter)


def pagerank_literal(s: SummaryGraph, damping: float = PAGERANK_DAMPING, tol: float = DEFAULT_TOL,
                     max_iter: int = DEFAULT_MAX_ITER) -> ScoreVector:
    """Node-by-node reference sweep; quadratic in reconstructed edges."""
    _check(damping)
    return _literal(s, _restart(s.node_count, None), damping, tol, max_iter)


def rwr_literal(s: SummaryGraph, query: int, damping: float = RWR_DAMPING, tol: float = DEFAULT_TOL,
                max_iter: int = DEFAULT_MAX_ITER) -> ScoreVector:
    _check(damping)
    return _literal(s, _restart(s.node_count, query), damping, tol, max_iter)


# --------------------------------------------------------------------------
# input-graph side


def _graph_spread(g: InputGraph):
    A = g.adjacency_matrix()
    deg = np.asarray(A.sum(axis=1)).ravel()
    inv = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
    return lambda r: A @ (inv * r)


def pagerank_exact(g: InputGraph, damping: float = PAGERANK_DAMPING, tol: float = DEFAULT_TOL,
                   max_iter: int = DEFAULT_MAX_ITER) -> ScoreVector:
    _check(damping)
    n = g.node_count
    return _iterate(_graph_spread(g), n, _restart(n, None), damping, tol, max_iter)


def rwr_exact(g: InputGraph, query: int, damping: float = RWR_DAMPING, tol: float = DEFAULT_TOL,
              max_iter: int = DEFAULT_MAX_ITER) -> ScoreVector:
    _check(damping)
    n = g.node_count
    return _iterate(_graph_spread(g), n, _restart(n, query), damping, tol, max_iter)


def node_importance_error(g: InputGraph, s: SummaryGraph, damping: float = PAGERANK_DAMPING,
                          tol: float = DEFAULT_TOL, exact: ScoreVector | None = None) -> float:
    """L1 distance between PageRank on the input graph and on the summary."""
    exact = exact or pagerank_exact(g, damping, tol)
    approx = pagerank_summary(s, damping, tol)
    return float(np.abs(exact.scores - approx.scores).sum())


def sample_queries(n: int, num_queries: int, rng_seed: int = 0) -> list[int]:
    """Uniform sample without replacement; every node, in order, if ``num_queries >= n``."""
    if num_queries >= n:
        return list(range(n))
    rng = np.random.default_rng(rng_seed)
    return sorted(rng.choice(n, size=num_queries, replace=False).tolist())


def node_proximity_error(g: InputGraph, s: SummaryGraph, damping: float = RWR_DAMPING, tol: float = DEFAULT_TOL,
                         num_queries: int = 100, rng_seed: int = 0, exact_cache: dict | None = None) -> float:
    """Mean L1 distance between RWR scores on the input graph and on the summary."""
    if g.node_count != s.node_count:
        raise ValueError("graph and summary disagree on |V|")
    queries = sample_queries(g.node_count, num_queries, rng_seed)
    index = SummaryIndex(s)
    spread = None
    total = 0.0
    for u in queries:
        if exact_cache is not None and u in exact_cache:
            ex = exact_cache[u]
        else:
            if spread is None:
                spread = _graph_spread(g)
            ex = _iterate(spread, g.node_count, _restart(g.node_count, u), damping, tol, DEFAULT_MAX_ITER).scores
            if exact_cache is not None:
                exact_cache[u] = ex
        approx = rwr_summary(s, u, damping, tol, index=index).scores
        total += float(np.abs(ex - approx).sum())
    return total / len(queries)


# --------------------------------------------------------------------------
# score output


def format_scores(scores: np.ndarray) -> str:
    return "".join(f"{i} {float(x)!r}\n" for i, x in enumerate(scores))


def pack_scores(scores: np.ndarray) -> bytes:
    """Little-endian ``uint64`` length followed by that many ``float64`` values."""
    arr = np.asarray(scores, dtype="<f8")
    return struct.pack("<Q", len(arr)) + arr.tobytes()


def unpack_scores(data: bytes) -> np.ndarray:
    (n,) = struct.unpack_from("<Q", data, 0)
    if len(data) != 8 + 8 * n:
        raise ValueError(f"score blob has {len(data)} bytes, expected {8 + 8 * n}")
    return np.frombuffer(data, dtype="<f8", offset=8, count=n).copy()
