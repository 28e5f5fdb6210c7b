"""Batch summarization: SSumM (weighted / unweighted), k-Grass, sparsification."""

from __future__ import annotations

import logging
import math
import random
import sys
from dataclasses import dataclass, field

import numpy as np

from .blocks import BlockState, Loss
from .graph import InputGraph, Model, Partition, SummaryGraph
from .grouping import GroupingConfig, derive_key, group_supernodes
from .metrics import log2_or_zero, size_bits

log = logging.getLogger(__name__)

KGRASS_CAP = 2000


@dataclass
class MergeCandidate:
    pair: tuple[int, int]
    loss_delta: float


@dataclass
class RunStats:
    """Instrumentation filled in by the summarizers."""

    iterations: int = 0
    merges: int = 0
    rejected: int = 0
    evaluations: int = 0
    worst_accepted_delta: float = -math.inf
    sparsified: int = 0
    forced_merges: int = 0
    trace: list = field(default_factory=list)


def merge_delta(g: InputGraph, s: SummaryGraph, a: int, b: int, loss: Loss | str = Loss.MDL) -> float:
    """Exact change of ``loss`` if supernodes ``a`` and ``b`` of ``s`` were merged.

    The merged supernode's superedges are re-decided by the loss's presence
    rule; every other superedge of ``s`` is kept as is.
    """
    return BlockState.from_summary(g, s, loss).merge_delta(a, b)


# --------------------------------------------------------------------------
# SSumM


def threshold(t: int, iterations: int) -> float:
    """Minimum relative saving for a merge in iteration ``t`` (1-based)."""
    return 0.0 if t >= iterations else 1.0 / (1 + t)


def ssumm(
    g: InputGraph,
    target_bits: float,
    model: Model | str,
    iterations: int = 20,
    grouping: GroupingConfig | None = None,
    stats: RunStats | None = None,
    progress=None,
) -> SummaryGraph:
    """Summarize ``g`` to at most ``target_bits`` bits.

    Supernodes are regrouped by min-hash every iteration; inside a group a
    random supernode is paired with its best partner and merged when the
    loss drops by a large enough fraction.  The budget is checked after every
    merge; if it is still exceeded after ``iterations`` rounds the result is
    sparsified.
    """
    return ssumm_multi(g, [target_bits], model, iterations, grouping, stats, progress)[0]


def ssumm_multi(
    g: InputGraph,
    targets_bits,
    model: Model | str,
    iterations: int = 20,
    grouping: GroupingConfig | None = None,
    stats: RunStats | None = None,
    progress=None,
) -> list[SummaryGraph]:
    """:func:`ssumm` for several budgets sharing one merge trajectory.

    The merge sequence does not depend on the budget, only where it stops, so
    the result for each budget is identical to a separate :func:`ssumm` call.
    """
    targets_bits = list(targets_bits)
    stats = stats if stats is not None else RunStats()
    reached, finals = ssumm_trajectory(g, targets_bits, model, iterations, grouping, stats, progress)
    out = []
    for i, t in enumerate(targets_bits):
        if i in reached:
            out.append(reached[i])
        else:
            final = finals[i]
            out.append(sparsify(g, final, float(t)))
            stats.sparsified += final.superedge_count - out[-1].superedge_count
    return out


def ssumm_trajectory(
    g: InputGraph,
    targets_bits,
    model: Model | str,
    iterations: int = 20,
    grouping: GroupingConfig | None = None,
    stats: RunStats | None = None,
    progress=None,
) -> tuple[dict[int, SummaryGraph], dict[int, SummaryGraph]]:
    """Run the merge phase once for all budgets.

    Returns two dicts keyed by position in ``targets_bits``: the summaries of
    the budgets met by merging alone, and for every other budget the merged
    summary it is to be sparsified from (the state after the last iteration,
    plus forced merges when the membership bits alone exceed the budget).
    """
    targets = [float(t) for t in targets_bits]
    if any(not t > 0 for t in targets):
        raise ValueError("target_bits must be positive")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    model = Model(model)
    cfg = grouping or GroupingConfig()
    stats = stats if stats is not None else RunStats()
    state = BlockState.from_graph(g, model, Loss.MDL)

    pending = sorted(range(len(targets)), key=lambda i: (-targets[i], i))
    results: dict[int, SummaryGraph] = {}

    def capture() -> None:
        bits = state.size_bits()
        snap = None
        while pending and bits <= targets[pending[0]]:
            snap = snap or state.to_summary()
            results[pending.pop(0)] = snap

    capture()
    for t in range(1, iterations + 1):
        if not pending:
            break
        stats.iterations = t
        theta = threshold(t, iterations)
        if state.weighted:
            # w_max is held fixed inside an iteration, so merges stay local
            state.frozen_wmax = max(state.wmax, 1)
        groups = group_supernodes(g, state.partition, cfg, iteration=t)
        rng = random.Random(derive_key(cfg.rng_seed, t, 0x6D65))
        for group in groups:
            if not pending:
                break
            _merge_group(state, group, theta, rng, stats, capture, pending)
        state.frozen_wmax = None
        state.recompute()
        line = f"iter={t} |S|={state.supernode_count} bits={state.size_bits():.1f}"
        stats.trace.append((t, state.supernode_count, state.size_bits(), state.objective()))
        if progress is not None:
            print(line, file=progress)
        log.debug(line)

    finals: dict[int, SummaryGraph] = {}
    for i in pending:
        # pending is in decreasing target order, so forcing only ever continues
        _force_merges(g, state, targets[i], cfg, stats, iterations, progress)
        finals[i] = state.to_summary()
    return results, finals


def _membership_bits(state: BlockState) -> float:
    return state.node_count * log2_or_zero(state.supernode_count)


def _force_merges(g: InputGraph, state: BlockState, target: float, cfg: GroupingConfig, stats: RunStats,
                  t: int, progress=None) -> None:
    """Merge past the objective until the membership bits fit under ``target``.

    Only reached when ``iterations`` rounds left more supernodes than any
    sparsification can pay for.  These merges may raise the objective, so they
    are counted in ``stats.forced_merges`` rather than ``stats.merges``.
    """
    while _membership_bits(state) > target and state.supernode_count > 1:
        t += 1
        if state.weighted:
            state.frozen_wmax = max(state.wmax, 1)
        groups = group_supernodes(g, state.partition, cfg, iteration=t)
        rng = random.Random(derive_key(cfg.rng_seed, t, 0x666F))
        before = stats.forced_merges
        for group in groups:
            queue = list(group)
            while len(queue) > 1 and _membership_bits(state) > target:
                a = queue.pop(rng.randrange(len(queue)))
                best = None
                for b in queue:
                    delta, _ = state.quick_merge_delta(a, b)
                    stats.evaluations += 1
                    key = (a, b) if a < b else (b, a)
                    if best is None or (delta, key) < best[:2]:
                        best = (delta, key, b)
                b = best[2]
                queue.remove(b)
                state.apply(state.plan_merge(a, b))
                stats.forced_merges += 1
        if stats.forced_merges == before:
            # no shared shingles left: merge the two smallest supernodes
            sids = sorted(state.partition.supernodes(), key=lambda x: (state.partition.size(x), x))
            state.apply(state.plan_merge(sids[0], sids[1]))
            stats.forced_merges += 1
        state.frozen_wmax = None
        state.recompute()
        if progress is not None:
            print(f"iter={t} |S|={state.supernode_count} bits={state.size_bits():.1f} forced", file=progress)


def _merge_group(state: BlockState, group, theta, rng, stats, capture, pending) -> None:
    queue = list(group)
    quick = state.quick_merge_delta
    while len(queue) > 1:
        i = rng.randrange(len(queue))
        a = queue[i]
        best = None
        for b in queue:
            if b == a:
                continue
            delta, old_cost = quick(a, b)
            stats.evaluations += 1
            key = (a, b) if a < b else (b, a)
            if best is None or delta < best[0] or (delta == best[0] and key < best[2]):
                best = (delta, old_cost, key, b)
        delta, old_cost, _, b = best
        saving = -delta / old_cost if old_cost > 0 else 0.0
        if state.improves(delta) and saving >= theta:
            before = state.objective()
            keep = state.apply(state.plan_merge(a, b))
            after = state.objective()
            stats.merges += 1
            stats.worst_accepted_delta = max(stats.worst_accepted_delta, after - before)
            queue = [x for x in queue if x != a and x != b]
            queue.append(keep)
            capture()
            if not pending:
                return
        else:
            stats.rejected += 1
            queue.pop(i)


# --------------------------------------------------------------------------
# sparsification


def _drop_gain(e: int, pairs: int, weighted: bool) -> float:
    """Increase of RE_1 when superedge with ``e`` edges over ``pairs`` pairs is dropped."""
    if weighted:
        return e - 2.0 * e * (pairs - e) / pairs
    return float(e - (pairs - e))


def sparsify(g: InputGraph, s: SummaryGraph, target_bits: float) -> SummaryGraph:
    """Greedily drop superedges, cheapest RE_1 increase per saved bit first.

    Every superedge saves the same ``2 log2|S| (+ log2 w_max)`` bits except a
    unique maximum-weight superedge in the weighted model, whose removal also
    shrinks every weight field; both kinds are compared on the per-bit rate.
    """
    if size_bits(s) <= target_bits:
        return s
    n_super = s.supernode_count
    floor = s.node_count * log2_or_zero(n_super)
    if floor > target_bits:
        raise ValueError(
            f"target of {target_bits:.1f} bits is below the membership cost {floor:.1f} bits"
        )
    weighted = s.model is Model.WEIGHTED
    ls = log2_or_zero(n_super)
    keep = dict(s.superedges)
    ranked = sorted((_drop_gain(c, s.pairs(*k), weighted), k) for k, c in keep.items())
    counts: dict[int, int] = {}
    for c in keep.values():
        counts[c] = counts.get(c, 0) + 1
    distinct = sorted(counts)
    by_count: dict[int, list] = {}
    for gain, k in ranked:
        by_count.setdefault(keep[k], []).append((gain, k))
    pos = 0

    def bits_now() -> float:
        n_edges = len(keep)
        bits = 2 * n_edges * ls + s.node_count * ls
        if weighted and n_edges:
            bits += n_edges * log2_or_zero(distinct[-1])
        return bits

    def remove(k) -> None:
        c = keep.pop(k)
        counts[c] -= 1
        if not counts[c]:
            del counts[c]
            distinct.remove(c)

    while bits_now() > target_bits:
        while ranked[pos][1] not in keep:
            pos += 1
        gain, k = ranked[pos]
        choice = k
        if weighted:
            lw = log2_or_zero(distinct[-1])
            unit = 2 * ls + lw
            top = distinct[-1]
            if counts[top] == 1:
                special = next(x for x in by_count[top] if x[1] in keep)
                lw_next = log2_or_zero(distinct[-2]) if len(distinct) > 1 else 0.0
                extra = (len(keep) - 1) * (lw - lw_next)
                if special[1] == k:
                    pass
                elif unit > 0 and unit + extra > 0:
                    if (special[0] / (unit + extra), special[1]) < (gain / unit, k):
                        choice = special[1]
        remove(choice)
    return s.with_superedges(keep)


# --------------------------------------------------------------------------
# k-Grass


def _block_err(e, pairs, weighted: bool):
    """Vectorized RE_1 of one block under the model's optimal superedge rule."""
    e = np.asarray(e, dtype=np.float64)
    pairs = np.asarray(pairs, dtype=np.float64)
    if weighted:
        safe = np.where(pairs > 0, pairs, 1.0)
        return np.where(e > 0, 2.0 * e * (pairs - e) / safe, 0.0)
    return np.minimum(e, pairs - e)


class _KGrass:
    """Exact greedy merging over all supernode pairs with a dense delta matrix."""

    def __init__(self, g: InputGraph, weighted: bool):
        n = g.node_count
        self.n = n
        self.weighted = weighted
        self.E = np.zeros((n, n), dtype=np.int64)
        edges = g.edge_array()
        if len(edges):
            self.E[edges[:, 0], edges[:, 1]] = 1
            self.E[edges[:, 1], edges[:, 0]] = 1
        self.size = np.ones(n, dtype=np.int64)
        self.alive = np.ones(n, dtype=bool)
        self.partition = Partition.singletons(n)
        self.D = np.full((n, n), np.inf)
        for c in range(n):
            self._fill_row(c)

    def f(self, e, pairs):
        return _block_err(e, pairs, self.weighted)

    def _offdiag_nnz(self):
        r, c = np.nonzero(self.E)
        keep = r != c
        return r[keep], c[keep]

    def _fill_row(self, c: int, nnz=None) -> None:
        E, n_, alive, f = self.E, self.size, self.alive, self.f
        nc = n_[c]
        r_idx, c_idx = nnz if nnz is not None else self._offdiag_nnz()
        # H[d] = sum over neighbors x != d of f(E_dx, (nc+nd) nx) - f(E_dx, nd nx)
        e_rc = E[r_idx, c_idx]
        h_vals = f(e_rc, (nc + n_[r_idx]) * n_[c_idx]) - f(e_rc, n_[r_idx] * n_[c_idx])
        H = np.bincount(r_idx, weights=h_vals, minlength=self.n)
        ecol = E[:, c]
        row = H - (f(ecol, (nc + n_) * nc) - f(ecol, n_ * nc))
        nbrs = np.flatnonzero(E[c])
        nbrs = nbrs[nbrs != c]
        if len(nbrs):
            ecx = E[c, nbrs]                      # (k,)
            edx = E[:, nbrs]                      # (n, k)
            nx = n_[nbrs]
            tot = n_[:, None] + nc
            term = f(ecx[None, :] + edx, tot * nx[None, :]) - f(ecx, nc * nx)[None, :] \
                - f(edx, tot * nx[None, :])
            # exclude X == D
            term[nbrs, np.arange(len(nbrs))] = 0.0
            row += term.sum(axis=1)
        ecc = E[c, c]
        edd = np.diagonal(E)
        ecd = E[c]
        tot = n_ + nc
        row += f(ecc + edd + ecd, tot * (tot - 1) // 2) - f(ecc, nc * (nc - 1) // 2) \
            - f(edd, n_ * (n_ - 1) // 2) - f(ecd, n_ * nc)
        row[~alive] = np.inf
        row[c] = np.inf
        self.D[c, :] = row
        self.D[:, c] = row

    def _third_party(self, rows, x, ex_col, nx):
        """T_X[C, D] for C in ``rows`` and all D, with E_.X given by ``ex_col``."""
        n_, f = self.size, self.f
        ec = ex_col[rows][:, None]
        ed = ex_col[None, :]
        tot = n_[rows][:, None] + n_[None, :]
        return f(ec + ed, tot * nx) - f(ec, n_[rows][:, None] * nx) - f(ed, n_[None, :] * nx)

    def best_pair(self) -> tuple[int, int, float]:
        D = self.D
        m = float(D.min())
        tol = 1e-9 * max(1.0, abs(m))
        flat = int(np.flatnonzero(D.ravel() <= m + tol)[0])
        i, j = divmod(flat, self.n)
        return (i, j, m) if i < j else (j, i, m)

    def merge(self, a: int, b: int) -> None:
        E, n_ = self.E, self.size
        keep, gone = self.partition.merge(a, b)
        nbr = (E[a] > 0) | (E[b] > 0)
        nbr[[a, b]] = False
        nbr &= self.alive
        rows = np.flatnonzero(nbr)
        old_a, old_b = E[:, a].copy(), E[:, b].copy()
        na, nb = int(n_[a]), int(n_[b])
        if len(rows):
            upd = -self._third_party(rows, a, old_a, na) - self._third_party(rows, b, old_b, nb)
        # apply the merge to E and sizes
        self_e = E[a, a] + E[b, b] + E[a, b]
        col = old_a + old_b
        E[:, keep] = col
        E[keep, :] = col
        E[keep, keep] = self_e
        E[:, gone] = 0
        E[gone, :] = 0
        n_[keep] = na + nb
        n_[gone] = 0
        self.alive[gone] = False
        if len(rows):
            upd += self._third_party(rows, keep, E[:, keep], int(n_[keep]))
            # columns outside the rows block get the symmetric update
            alive = self.alive.copy()
            alive[[keep]] = False
            self.D[rows, :] += np.where(alive[None, :], upd, 0.0)
            others = alive.copy()
            others[rows] = False
            self.D[np.ix_(others, rows)] += upd[:, others].T
        self.D[gone, :] = np.inf
        self.D[:, gone] = np.inf
        self._fill_row(keep)

    def summary(self, model: Model) -> SummaryGraph:
        idx = np.flatnonzero(self.alive)
        E, n_ = self.E, self.size
        superedges = {}
        for ii, a in enumerate(idx):
            for b in idx[ii:]:
                e = int(E[a, b])
                if not e:
                    continue
                pairs = int(n_[a] * (n_[a] - 1) // 2) if a == b else int(n_[a] * n_[b])
                if self.weighted or 2 * e > pairs:
                    superedges[(int(a), int(b))] = e
        return SummaryGraph(self.partition.copy(), superedges, model)


def kgrass(g: InputGraph, k: int, model: Model | str, cap: int = KGRASS_CAP, stats: RunStats | None = None) -> SummaryGraph:
    """Greedily merge the supernode pair with the least RE_1 increase until ``k`` remain."""
    return kgrass_multi(g, [k], model, cap, stats)[0]


def kgrass_multi(g: InputGraph, ks, model: Model | str, cap: int = KGRASS_CAP, stats: RunStats | None = None) -> list[SummaryGraph]:
    """:func:`kgrass` for several targets along one greedy trajectory."""
    model = Model(model)
    n = g.node_count
    ks = [int(k) for k in ks]
    for k in ks:
        if not 1 <= k <= n:
            raise ValueError(f"target supernode count {k} outside 1..{n}")
    if n > cap:
        raise ValueError(f"k-Grass is exact O(|V|^3); refusing {n} nodes (cap {cap})")
    stats = stats if stats is not None else RunStats()
    kg = _KGrass(g, model is Model.WEIGHTED)
    results: dict[int, SummaryGraph] = {}
    remaining = n
    for k in sorted(set(ks), reverse=True):
        while remaining > k:
            a, b, delta = kg.best_pair()
            kg.merge(a, b)
            remaining -= 1
            stats.merges += 1
            stats.trace.append(((a, b), delta))
        results[k] = kg.summary(model)
    return [results[k] for k in ks]
