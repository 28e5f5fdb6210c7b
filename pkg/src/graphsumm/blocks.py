"""Mutable supernode-level state shared by the summarizers.

:class:`BlockState` keeps, for every supernode, the number of input edges to
each adjacent supernode (``E_AB``; the self entry holds internal edges), the
set of superedges, and running totals from which the active loss is evaluated
in O(1).  Merges and single-node moves are first *planned*, which yields the
exact change of the loss, and then applied.

Two losses are supported:

``re1``
    L1 reconstruction error.  Superedge rule: weighted keeps every block with
    ``E > 0``; unweighted keeps a block iff ``E > pairs / 2``.
``mdl``
    Size in bits plus the bits needed to restore the input edges.  A
    superedge is kept iff its presence is strictly cheaper than its absence.

Superedge presence is re-decided only for blocks touched by an operation.
"""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass

from .graph import InputGraph, Model, Partition, SummaryGraph, block_edge_counts
from .metrics import block_entropy_bits, log2_or_zero


class Loss(str, enum.Enum):
    RE1 = "re1"
    MDL = "mdl"


SELF = -1  # placeholder for "the surviving supernode itself" in merge plans

# changes smaller than this fraction of the loss are rounding noise, not improvements
IMPROVE_RTOL = 1e-10


@dataclass
class Plan:
    """A planned merge or move together with its exact loss change."""

    kind: str
    delta: float
    old_cost: float  # loss contributed by the replaced blocks, before the operation
    old_keys: list
    new_blocks: list  # (x, y, e, present)
    n_super: int
    d_present: int
    d_acc: float
    d_present_e: int
    removed_counts: list
    added_counts: list
    args: tuple = ()


class BlockState:
    def __init__(self, model: Model | str, loss: Loss | str = Loss.MDL, track_adjacency: bool = False):
        self.model = Model(model)
        self.loss = Loss(loss)
        self.weighted = self.model is Model.WEIGHTED
        self.partition = Partition()
        self.E: dict[int, dict[int, int]] = {}
        self.P: dict[int, set[int]] = {}
        self.adj: list[set[int]] | None = [] if track_adjacency else None
        self.m = 0
        self.n_present = 0
        self.acc = 0  # sum of per-superedge loss terms (int for unweighted, float otherwise)
        self.present_e = 0
        self.wcount: Counter = Counter()
        self.wmax = 0
        # weighted mdl only: w_max used by the loss and the superedge rule while set
        self.frozen_wmax: int | None = None

    # ------------------------------------------------------------------
    # construction

    @classmethod
    def from_graph(cls, g: InputGraph, model, loss=Loss.MDL, track_adjacency: bool = False) -> "BlockState":
        """Identity summary of ``g``: singleton supernodes, one superedge per edge."""
        st = cls(model, loss, track_adjacency)
        n = g.node_count
        st.partition = Partition.singletons(n)
        st.E = {i: dict.fromkeys(g.neighbors(i), 1) for i in range(n)}
        st.P = {i: set(g.neighbors(i)) for i in range(n)}
        if track_adjacency:
            st.adj = [set(g.neighbors(i)) for i in range(n)]
        st.m = g.edge_count
        st.n_present = g.edge_count
        st.present_e = g.edge_count
        st.acc = st._contrib(1, 1) * g.edge_count
        if g.edge_count and st.weighted:
            st.wcount[1] = g.edge_count
            st.wmax = 1
        return st

    @classmethod
    def from_summary(cls, g: InputGraph, s: SummaryGraph, loss=Loss.MDL) -> "BlockState":
        st = cls(s.model, loss)
        st.partition = s.partition.copy()
        counts = block_edge_counts(g, s.partition)
        st.E = {sid: {} for sid in st.partition.members}
        st.P = {sid: set() for sid in st.partition.members}
        for (a, b), e in counts.items():
            st.E[a][b] = e
            st.E[b][a] = e
        for a, b in s.superedges:
            st.P[a].add(b)
            st.P[b].add(a)
        st.m = g.edge_count
        st.recompute()
        return st

    # ------------------------------------------------------------------
    # scalar views

    @property
    def node_count(self) -> int:
        return self.partition.node_count

    @property
    def supernode_count(self) -> int:
        return self.partition.live_supernode_count

    def size(self, sid: int) -> int:
        return len(self.partition.members[sid])

    def pairs(self, a: int, b: int) -> int:
        na = len(self.partition.members[a])
        if a == b:
            return na * (na - 1) // 2
        return na * len(self.partition.members[b])

    def _contrib(self, e: int, pairs: int):
        if self.loss is Loss.RE1:
            if self.weighted:
                return 2.0 * e * (pairs - e) / pairs
            return pairs - e
        if self.weighted:
            return block_entropy_bits(e, pairs)
        return pairs - e

    def _decide(self, e: int, pairs: int, ls: float, lw: float, lv: float) -> bool:
        if e == 0:
            return False
        if self.loss is Loss.RE1:
            return True if self.weighted else 2 * e > pairs
        if self.weighted:
            return 2 * ls + lw + block_entropy_bits(e, pairs) < 2 * e * lv
        return 2 * ls + 2 * (pairs - e) * lv < 2 * e * lv

    def _block_cost(self, e: int, pairs: int, present: bool, ls: float, lw: float, lv: float) -> float:
        """Loss attributable to one block (excludes the membership term)."""
        if self.loss is Loss.RE1:
            return float(self._contrib(e, pairs)) if present else float(e)
        if not present:
            return 2 * e * lv
        if self.weighted:
            return 2 * ls + lw + block_entropy_bits(e, pairs)
        return 2 * ls + 2 * (pairs - e) * lv

    def _loss(self, n_super: int, n_present: int, wmax: int, acc, present_e: int) -> float:
        if self.loss is Loss.RE1:
            return acc + (self.m - present_e)
        if self.frozen_wmax is not None:
            wmax = self.frozen_wmax
        ls = log2_or_zero(n_super)
        lv = log2_or_zero(self.node_count)
        size = 2 * n_present * ls + self.node_count * ls
        absent = 2 * (self.m - present_e) * lv
        if self.weighted:
            if n_present:
                size += n_present * log2_or_zero(wmax)
            return size + acc + absent
        return size + 2 * acc * lv + absent

    def improves(self, delta: float) -> bool:
        """True if ``delta`` is a strict decrease beyond floating-point noise."""
        return delta < -IMPROVE_RTOL * max(1.0, abs(self.objective()))

    def rule_wmax(self) -> int:
        return self.wmax if self.frozen_wmax is None else self.frozen_wmax

    def objective(self) -> float:
        """Active loss (with ``frozen_wmax`` in place of w_max when set)."""
        return self._loss(self.supernode_count, self.n_present, self.wmax, self.acc, self.present_e)

    def size_bits(self) -> float:
        """True size in bits, regardless of ``frozen_wmax``."""
        ls = log2_or_zero(self.supernode_count)
        bits = 2 * self.n_present * ls + self.node_count * ls
        if self.weighted and self.n_present:
            bits += self.n_present * log2_or_zero(self.wmax)
        return bits

    # ------------------------------------------------------------------
    # planning

    def _new_wmax(self, removed: list, added: list) -> int:
        if not self.weighted or self.frozen_wmax is not None:
            return self.wmax
        best = max(added, default=0)
        wmax = self.wmax
        if best >= wmax:
            return best
        drop = removed.count(wmax) if removed else 0
        if self.wcount[wmax] > drop:
            return wmax
        rem = Counter(removed)
        for c in sorted(self.wcount, reverse=True):
            if self.wcount[c] - rem.get(c, 0) > 0:
                return max(c, best)
        return best

    def merge_delta(self, a: int, b: int) -> float:
        return self.plan_merge(a, b, build=False).delta

    def quick_merge_delta(self, a: int, b: int) -> tuple[float, float]:
        """``(delta, old_cost)`` of merging ``a`` and ``b``, as :meth:`plan_merge`.

        Inlined version for the inner search loop; MDL loss only, and for the
        weighted model only while ``frozen_wmax`` is set.
        """
        if self.loss is not Loss.MDL or (self.weighted and self.frozen_wmax is None):
            plan = self.plan_merge(a, b, build=False)
            return plan.delta, plan.old_cost
        log2 = math.log2
        members = self.partition.members
        E, P = self.E, self.P
        Ea, Eb = E[a], E[b]
        Pa, Pb = P[a], P[b]
        na, nb = len(members[a]), len(members[b])
        nm = na + nb
        S = len(members)
        V = self.partition.node_count
        ls_old = log2(S) if S > 1 else 0.0
        ls = log2(S - 1) if S > 2 else 0.0
        lv = log2(V) if V > 1 else 0.0
        weighted = self.weighted
        lw = log2(self.frozen_wmax) if weighted and self.frozen_wmax > 1 else 0.0
        lv2 = 2.0 * lv
        hdr_old = 2.0 * ls_old + lw
        hdr = 2.0 * ls + lw

        old_cost = 0.0
        new_cost = 0.0
        gone_present = 0  # present superedges among the replaced blocks
        for x, e in Ea.items():
            pairs = na * (na - 1) // 2 if x == a else na * len(members[x])
            if x in Pa:
                gone_present += 1
                if weighted:
                    if e == pairs:
                        old_cost += hdr_old
                    else:
                        p = e / pairs
                        old_cost += hdr_old - e * log2(p) - (pairs - e) * log2(1.0 - p)
                else:
                    old_cost += hdr_old + (pairs - e) * lv2
            else:
                old_cost += e * lv2
        for x, e in Eb.items():
            if x == a:
                continue
            pairs = nb * (nb - 1) // 2 if x == b else nb * len(members[x])
            if x in Pb:
                gone_present += 1
                if weighted:
                    if e == pairs:
                        old_cost += hdr_old
                    else:
                        p = e / pairs
                        old_cost += hdr_old - e * log2(p) - (pairs - e) * log2(1.0 - p)
                else:
                    old_cost += hdr_old + (pairs - e) * lv2
            else:
                old_cost += e * lv2

        new_present = 0

        def block(e: int, pairs: int) -> float:
            nonlocal new_present
            absent = e * lv2
            if weighted:
                if e == pairs:
                    cost = hdr
                else:
                    p = e / pairs
                    cost = hdr - e * log2(p) - (pairs - e) * log2(1.0 - p)
            else:
                cost = hdr + (pairs - e) * lv2
            if cost < absent:
                new_present += 1
                return cost
            return absent

        self_e = Ea.get(a, 0) + Eb.get(b, 0) + Ea.get(b, 0)
        if self_e:
            new_cost += block(self_e, nm * (nm - 1) // 2)
        for x, e in Ea.items():
            if x == a or x == b:
                continue
            new_cost += block(e + Eb.get(x, 0), nm * len(members[x]))
        for x, e in Eb.items():
            if x == a or x == b or x in Ea:
                continue
            new_cost += block(e, nm * len(members[x]))

        # superedges outside the replaced blocks pay the smaller id width too
        kept = self.n_present - gone_present
        delta = new_cost - old_cost + (2.0 * kept + V) * (ls - ls_old)
        return delta, old_cost

    def plan_merge(self, a: int, b: int, build: bool = True) -> Plan:
        if a == b:
            raise ValueError("cannot merge a supernode with itself")
        members = self.partition.members
        if a not in members or b not in members:
            raise KeyError(f"merge of dead supernode ({a}, {b})")
        E, P = self.E, self.P
        Ea, Eb = E[a], E[b]
        Pa, Pb = P[a], P[b]
        na, nb = len(members[a]), len(members[b])
        nm = na + nb
        n_super = len(members) - 1
        weighted = self.weighted
        mdl = self.loss is Loss.MDL
        contrib = self._contrib
        decide = self._decide
        block_cost = self._block_cost
        ls_old = log2_or_zero(len(members))
        ls = log2_or_zero(n_super)
        lw = log2_or_zero(self.rule_wmax())
        lv = log2_or_zero(self.node_count)

        d_present = 0
        d_acc = 0
        d_pe = 0
        old_cost = 0.0
        removed: list[int] = []
        added: list[int] = []
        old_keys = [] if build else None
        new_blocks = [] if build else None

        for x, e in Ea.items():
            pr = x in Pa
            pairs_x = (na * (na - 1) // 2) if x == a else na * len(members[x])
            if mdl:
                old_cost += block_cost(e, pairs_x, pr, ls_old, lw, lv)
            else:
                old_cost += contrib(e, pairs_x) if pr else e
            if pr:
                d_present -= 1
                d_acc -= contrib(e, pairs_x)
                d_pe -= e
                if weighted:
                    removed.append(e)
            if build:
                old_keys.append((a, x))
        for x, e in Eb.items():
            if x == a:
                continue
            pr = x in Pb
            pairs_x = (nb * (nb - 1) // 2) if x == b else nb * len(members[x])
            if mdl:
                old_cost += block_cost(e, pairs_x, pr, ls_old, lw, lv)
            else:
                old_cost += contrib(e, pairs_x) if pr else e
            if pr:
                d_present -= 1
                d_acc -= contrib(e, pairs_x)
                d_pe -= e
                if weighted:
                    removed.append(e)
            if build:
                old_keys.append((b, x))

        self_e = Ea.get(a, 0) + Eb.get(b, 0) + Ea.get(b, 0)
        if self_e:
            pairs_m = nm * (nm - 1) // 2
            pr = decide(self_e, pairs_m, ls, lw, lv)
            if pr:
                d_present += 1
                d_acc += contrib(self_e, pairs_m)
                d_pe += self_e
                if weighted:
                    added.append(self_e)
            if build:
                new_blocks.append((SELF, SELF, self_e, pr))
        for x, e in Ea.items():
            if x == a or x == b:
                continue
            e += Eb.get(x, 0)
            pairs_x = nm * len(members[x])
            pr = decide(e, pairs_x, ls, lw, lv)
            if pr:
                d_present += 1
                d_acc += contrib(e, pairs_x)
                d_pe += e
                if weighted:
                    added.append(e)
            if build:
                new_blocks.append((SELF, x, e, pr))
        for x, e in Eb.items():
            if x == a or x == b or x in Ea:
                continue
            pairs_x = nm * len(members[x])
            pr = decide(e, pairs_x, ls, lw, lv)
            if pr:
                d_present += 1
                d_acc += contrib(e, pairs_x)
                d_pe += e
                if weighted:
                    added.append(e)
            if build:
                new_blocks.append((SELF, x, e, pr))

        wmax = self._new_wmax(removed, added)
        new = self._loss(n_super, self.n_present + d_present, wmax, self.acc + d_acc, self.present_e + d_pe)
        delta = new - self.objective()
        return Plan("merge", delta, old_cost, old_keys, new_blocks, n_super, d_present, d_acc, d_pe,
                    removed, added, (a, b))

    def quick_move_delta(self, w: int, b: int) -> float:
        """Change of the loss if subnode ``w`` moved into ``b``, as :meth:`plan_move`.

        Inlined version for the MoSSo inner loop; MDL loss only.
        """
        if self.loss is not Loss.MDL:
            return self.plan_move(w, b).delta
        if self.adj is None:
            raise RuntimeError("node moves need track_adjacency=True")
        log2 = math.log2
        members = self.partition.members
        assign = self.partition.assignment
        a = assign[w]
        if a == b:
            raise ValueError("node already in target supernode")
        if b not in members:
            raise KeyError(f"move into dead supernode {b}")
        cnt: dict[int, int] = {}
        for v in self.adj[w]:
            sv = assign[v]
            cnt[sv] = cnt.get(sv, 0) + 1
        E, P = self.E, self.P
        Ea, Eb, Pa, Pb = E[a], E[b], P[a], P[b]
        na, nb = len(members[a]), len(members[b])
        na2, nb2 = na - 1, nb + 1
        S = len(members)
        S2 = S if na2 else S - 1
        V = self.partition.node_count
        ls_old = log2(S) if S > 1 else 0.0
        ls = log2(S2) if S2 > 1 else 0.0
        lv2 = 2.0 * (log2(V) if V > 1 else 0.0)
        weighted = self.weighted
        wmax = self.rule_wmax()
        lw = log2(wmax) if weighted and wmax > 1 else 0.0
        hdr_old = 2.0 * ls_old + lw
        hdr = 2.0 * ls + lw
        removed: list[int] = []
        added: list[int] = []

        def present_cost(e, pairs, head):
            if not weighted:
                return head + (pairs - e) * lv2
            if e == pairs:
                return head
            p = e / pairs
            return head - e * log2(p) - (pairs - e) * log2(1.0 - p)

        old_cost = 0.0
        gone_present = 0
        for x, e in Ea.items():
            if x in Pa:
                gone_present += 1
                old_cost += present_cost(e, na * (na - 1) // 2 if x == a else na * len(members[x]), hdr_old)
                if weighted:
                    removed.append(e)
            else:
                old_cost += e * lv2
        for x, e in Eb.items():
            if x == a:
                continue
            if x in Pb:
                gone_present += 1
                old_cost += present_cost(e, nb * (nb - 1) // 2 if x == b else nb * len(members[x]), hdr_old)
                if weighted:
                    removed.append(e)
            else:
                old_cost += e * lv2

        new_cost = 0.0
        new_present = 0

        def block(e, pairs):
            nonlocal new_cost, new_present
            if e == 0:
                return
            absent = e * lv2
            cost = present_cost(e, pairs, hdr)
            if cost < absent:
                new_cost += cost
                new_present += 1
                if weighted:
                    added.append(e)
            else:
                new_cost += absent

        for x in Ea.keys() | Eb.keys():
            if x == a or x == b:
                continue
            nx_ = len(members[x])
            c = cnt.get(x, 0)
            if na2:
                block(Ea.get(x, 0) - c, na2 * nx_)
            block(Eb.get(x, 0) + c, nb2 * nx_)
        if na2:
            block(Ea.get(a, 0) - cnt.get(a, 0), na2 * (na2 - 1) // 2)
            block(Ea.get(b, 0) - cnt.get(b, 0) + cnt.get(a, 0), na2 * nb2)
        block(Eb.get(b, 0) + cnt.get(b, 0), nb2 * (nb2 - 1) // 2)

        kept = self.n_present - gone_present
        delta = new_cost - old_cost + (2.0 * kept + V) * (ls - ls_old)
        if weighted and self.frozen_wmax is None:
            # every superedge pays the new weight width
            new_w = self._new_wmax(removed, added)
            delta += (kept + new_present) * ((log2(new_w) if new_w > 1 else 0.0) - lw)
        return delta

    def plan_move(self, w: int, target: int) -> Plan:
        """Plan moving subnode ``w`` into supernode ``target``."""
        if self.adj is None:
            raise RuntimeError("node moves need track_adjacency=True")
        members = self.partition.members
        a = self.partition.assignment[w]
        b = target
        if a == b:
            raise ValueError("node already in target supernode")
        if b not in members:
            raise KeyError(f"move into dead supernode {b}")
        assign = self.partition.assignment
        cnt: dict[int, int] = {}
        for v in self.adj[w]:
            s = assign[v]
            cnt[s] = cnt.get(s, 0) + 1
        E, P = self.E, self.P
        Ea, Eb = E[a], E[b]
        na, nb = len(members[a]), len(members[b])
        na2, nb2 = na - 1, nb + 1
        n_super = len(members) - (1 if na2 == 0 else 0)
        ls_old = log2_or_zero(len(members))
        ls = log2_or_zero(n_super)
        lw = log2_or_zero(self.rule_wmax())
        lv = log2_or_zero(self.node_count)
        contrib, decide, weighted = self._contrib, self._decide, self.weighted

        d_present = 0
        d_acc = 0
        d_pe = 0
        old_cost = 0.0
        removed: list[int] = []
        added: list[int] = []
        old_keys = []
        new_blocks = []

        def drop(x, y, e, pr, pairs_xy):
            nonlocal d_present, d_acc, d_pe, old_cost
            old_cost += self._block_cost(e, pairs_xy, pr, ls_old, lw, lv)
            if pr:
                d_present -= 1
                d_acc -= contrib(e, pairs_xy)
                d_pe -= e
                if weighted:
                    removed.append(e)
            old_keys.append((x, y))

        def add(x, y, e, pairs_xy):
            nonlocal d_present, d_acc, d_pe
            if e == 0:
                return
            pr = decide(e, pairs_xy, ls, lw, lv)
            if pr:
                d_present += 1
                d_acc += contrib(e, pairs_xy)
                d_pe += e
                if weighted:
                    added.append(e)
            new_blocks.append((x, y, e, pr))

        for x, e in Ea.items():
            drop(a, x, e, x in P[a], self.pairs(a, x))
        for x, e in Eb.items():
            if x != a:
                drop(b, x, e, x in P[b], self.pairs(b, x))

        others = set(Ea) | set(Eb)
        others.discard(a)
        others.discard(b)
        for x in sorted(others):
            nx_ = len(members[x])
            c = cnt.get(x, 0)
            if na2:
                add(a, x, Ea.get(x, 0) - c, na2 * nx_)
            add(b, x, Eb.get(x, 0) + c, nb2 * nx_)
        if na2:
            add(a, a, Ea.get(a, 0) - cnt.get(a, 0), na2 * (na2 - 1) // 2)
            add(a, b, Ea.get(b, 0) - cnt.get(b, 0) + cnt.get(a, 0), na2 * nb2)
        add(b, b, Eb.get(b, 0) + cnt.get(b, 0), nb2 * (nb2 - 1) // 2)

        wmax = self._new_wmax(removed, added)
        new = self._loss(n_super, self.n_present + d_present, wmax, self.acc + d_acc, self.present_e + d_pe)
        delta = new - self.objective()
        return Plan("move", delta, old_cost, old_keys, new_blocks, n_super, d_present, d_acc, d_pe,
                    removed, added, (w, b))

    # ------------------------------------------------------------------
    # mutation

    def apply(self, plan: Plan) -> int | None:
        """Apply a plan from :meth:`plan_merge` or :meth:`plan_move`.

        Returns the surviving supernode id for merges, the retired id (or None)
        for moves.
        """
        if plan.old_keys is None:
            raise ValueError("plan was built without bookkeeping (build=False)")
        E, P = self.E, self.P
        for x, y in plan.old_keys:
            E[x].pop(y, None)
            E[y].pop(x, None)
            P[x].discard(y)
            P[y].discard(x)
        if plan.kind == "merge":
            a, b = plan.args
            keep, gone = self.partition.merge(a, b)
            del E[gone]
            for x in P.pop(gone):
                P[x].discard(gone)
            result = keep
        else:
            w, target = plan.args
            result = self.partition.move(w, target)
            keep = None
            if result is not None:
                E.pop(result)
                for x in P.pop(result):
                    P[x].discard(result)
        for x, y, e, pr in plan.new_blocks:
            if x == SELF:
                x = keep
            if y == SELF:
                y = keep
            E[x][y] = e
            E[y][x] = e
            if pr:
                P[x].add(y)
                P[y].add(x)
        self.n_present += plan.d_present
        self.acc += plan.d_acc
        self.present_e += plan.d_present_e
        if self.weighted:
            for c in plan.removed_counts:
                self.wcount[c] -= 1
                if not self.wcount[c]:
                    del self.wcount[c]
            for c in plan.added_counts:
                self.wcount[c] += 1
            self.wmax = max(self.wcount, default=0)
        return result

    def merge(self, a: int, b: int) -> tuple[int, float]:
        plan = self.plan_merge(a, b)
        return self.apply(plan), plan.delta

    def add_node(self) -> int:
        if self.adj is None:
            raise RuntimeError("adding nodes needs track_adjacency=True")
        sid = self.partition.add_node()
        self.E[sid] = {}
        self.P[sid] = set()
        self.adj.append(set())
        return sid

    def update_edge(self, u: int, v: int, insert: bool) -> bool:
        """Insert or delete one edge and re-decide its block; False if it was a no-op."""
        adj = self.adj
        if adj is None:
            raise RuntimeError("edge updates need track_adjacency=True")
        if u == v:
            raise ValueError("self-loops are not allowed")
        if insert == (v in adj[u]):
            return False
        assign = self.partition.assignment
        a, b = assign[u], assign[v]
        pairs_ab = self.pairs(a, b)
        lw = log2_or_zero(self.rule_wmax())
        e_old = self.E[a].get(b, 0)
        pr_old = b in self.P[a]
        if insert:
            adj[u].add(v)
            adj[v].add(u)
            self.m += 1
            e_new = e_old + 1
        else:
            adj[u].discard(v)
            adj[v].discard(u)
            self.m -= 1
            e_new = e_old - 1
        if pr_old:
            self.n_present -= 1
            self.acc -= self._contrib(e_old, pairs_ab)
            self.present_e -= e_old
            if self.weighted:
                self.wcount[e_old] -= 1
                if not self.wcount[e_old]:
                    del self.wcount[e_old]
        if e_new:
            self.E[a][b] = e_new
            self.E[b][a] = e_new
        else:
            self.E[a].pop(b, None)
            self.E[b].pop(a, None)
        ls = log2_or_zero(self.supernode_count)
        lv = log2_or_zero(self.node_count)
        pr_new = self._decide(e_new, pairs_ab, ls, lw, lv)
        if pr_new:
            self.P[a].add(b)
            self.P[b].add(a)
            self.n_present += 1
            self.acc += self._contrib(e_new, pairs_ab)
            self.present_e += e_new
            if self.weighted:
                self.wcount[e_new] += 1
        else:
            self.P[a].discard(b)
            self.P[b].discard(a)
        if self.weighted:
            self.wmax = max(self.wcount, default=0)
        return True

    def drop_superedge(self, a: int, b: int) -> None:
        if b not in self.P[a]:
            raise KeyError(f"no superedge {(a, b)}")
        e = self.E[a][b]
        self.P[a].discard(b)
        self.P[b].discard(a)
        self.n_present -= 1
        self.acc -= self._contrib(e, self.pairs(a, b))
        self.present_e -= e
        if self.weighted:
            self.wcount[e] -= 1
            if not self.wcount[e]:
                del self.wcount[e]
            self.wmax = max(self.wcount, default=0)

    # ------------------------------------------------------------------
    # consistency

    def recompute(self) -> None:
        """Rebuild the running totals from E and P (clears float drift)."""
        self.n_present = 0
        self.acc = 0
        self.present_e = 0
        self.wcount = Counter()
        for a, nbrs in self.P.items():
            for b in nbrs:
                if b < a:
                    continue
                e = self.E[a][b]
                self.n_present += 1
                self.acc += self._contrib(e, self.pairs(a, b))
                self.present_e += e
                self.wcount[e] += 1
        if not self.weighted:
            self.wcount = Counter()
        self.wmax = max(self.wcount, default=0)

    def superedges(self) -> dict[tuple[int, int], int]:
        out = {}
        for a, nbrs in self.P.items():
            Ea = self.E[a]
            for b in nbrs:
                if a <= b:
                    out[(a, b)] = Ea[b]
        return out

    def to_summary(self) -> SummaryGraph:
        return SummaryGraph(self.partition.copy(), self.superedges(), self.model)

    def current_graph(self) -> InputGraph:
        if self.adj is None:
            raise RuntimeError("state does not track subnode adjacency")
        n = len(self.adj)
        return InputGraph(n, ((u, v) for u in range(n) for v in self.adj[u] if u < v))

    def check(self) -> None:
        """Verify E against the subnode adjacency and the cached totals against a fresh recount."""
        self.partition.validate()
        if self.adj is not None:
            assign = self.partition.assignment
            expect: dict[tuple[int, int], int] = {}
            for u, nbrs in enumerate(self.adj):
                for v in nbrs:
                    if u < v:
                        key = (assign[u], assign[v]) if assign[u] <= assign[v] else (assign[v], assign[u])
                        expect[key] = expect.get(key, 0) + 1
            got = {}
            for a, row in self.E.items():
                for b, e in row.items():
                    if a <= b:
                        got[(a, b)] = e
            if got != expect:
                raise AssertionError("block edge counts disagree with the subnode adjacency")
        for a, nbrs in self.P.items():
            for b in nbrs:
                if self.E[a].get(b, 0) < 1:
                    raise AssertionError(f"superedge {(a, b)} without edges")
                if a not in self.P[b]:
                    raise AssertionError("asymmetric superedge set")
        totals = (self.n_present, self.acc, self.present_e, self.wmax)
        self.recompute()
        fresh = (self.n_present, self.acc, self.present_e, self.wmax)
        if totals[0] != fresh[0] or totals[2] != fresh[2] or totals[3] != fresh[3]:
            raise AssertionError(f"running totals {totals} != recount {fresh}")
        if not math.isclose(totals[1], fresh[1], rel_tol=1e-9, abs_tol=1e-6):
            raise AssertionError(f"running loss sum {totals[1]} != recount {fresh[1]}")


def rule_superedges(g: InputGraph, partition: Partition, model: Model | str, loss: Loss | str = Loss.RE1,
                    wmax: int | None = None) -> SummaryGraph:
    """Summary of ``partition`` whose superedges follow the loss's presence rule.

    For the weighted MDL rule, ``wmax`` is the w_max plugged into the rule
    (default: the largest block count, i.e. every block present).
    """
    st = BlockState(model, loss)
    counts = block_edge_counts(g, partition)
    ls = log2_or_zero(partition.live_supernode_count)
    lv = log2_or_zero(partition.node_count)
    if wmax is None:
        wmax = max(counts.values(), default=0)
    lw = log2_or_zero(wmax)
    members = partition.members
    chosen = {}
    for (a, b), e in counts.items():
        na = len(members[a])
        pairs = na * (na - 1) // 2 if a == b else na * len(members[b])
        if st._decide(e, pairs, ls, lw, lv):
            chosen[(a, b)] = e
    return SummaryGraph(partition.copy(), chosen, st.model)
