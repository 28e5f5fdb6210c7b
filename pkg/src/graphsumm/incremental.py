"""MoSSo-Lossy: keep a summary graph up to date under edge insertions and deletions.

After each change ``{src, dst}``, up to ``sample_size`` neighbors of each
endpoint are sampled.  Each sampled ``w`` may move into the supernode of
another sampled node from the same min-hash group, and does so only when the
active objective (weighted or unweighted MDL cost) strictly drops.
"""

from __future__ import annotations

import enum
import logging
import random
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

from .blocks import BlockState, Loss
from .graph import Model, Partition, SummaryGraph
from .grouping import NO_NEIGHBORS, derive_key, hash64

log = logging.getLogger(__name__)


class EventKind(str, enum.Enum):
    INSERT = "+"
    DELETE = "-"


@dataclass(frozen=True)
class StreamEvent:
    kind: EventKind
    src: int
    dst: int

    def __post_init__(self):
        if self.src == self.dst:
            raise ValueError(f"self-loop event on {self.src}")


class StreamFormatError(ValueError):
    pass


def parse_stream(lines: Iterable[str]) -> Iterator[StreamEvent]:
    """Parse ``+ u v`` / ``- u v`` lines; blank and ``#`` lines are skipped."""
    for lineno, line in enumerate(lines, start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        parts = text.split()
        if len(parts) != 3 or parts[0] not in ("+", "-"):
            raise StreamFormatError(f"line {lineno}: expected '+ u v' or '- u v', got {text!r}")
        try:
            u, v = int(parts[1]), int(parts[2])
        except ValueError:
            raise StreamFormatError(f"line {lineno}: non-integer node id in {text!r}") from None
        if u < 0 or v < 0:
            raise StreamFormatError(f"line {lineno}: negative node id")
        if u == v:
            raise StreamFormatError(f"line {lineno}: self-loop event")
        yield StreamEvent(EventKind(parts[0]), u, v)


def format_event(ev: StreamEvent) -> str:
    return f"{ev.kind.value} {ev.src} {ev.dst}"


@dataclass
class StreamStats:
    events: int = 0
    ignored: int = 0
    attempts: int = 0
    moves: int = 0
    worst_move_delta: float = float("-inf")
    move_log: list = field(default_factory=list)


class MossoLossy:
    """Incremental summarizer state; feed events with :meth:`process`."""

    def __init__(self, model: Model | str, sample_size: int = 10, rng_seed: int = 0,
                 audit: bool = False, keep_move_log: bool = False):
        if sample_size < 0:
            raise ValueError("sample_size must be >= 0")
        self.model = Model(model)
        self.sample_size = sample_size
        self.rng_seed = rng_seed
        self.state = BlockState(self.model, Loss.MDL, track_adjacency=True)
        self.rng = random.Random(derive_key(rng_seed, 0x6D6F7373))
        self.key = derive_key(rng_seed, 0x7368)
        self.audit = audit
        self.keep_move_log = keep_move_log
        self.stats = StreamStats()
        self.ids: dict[int, int] = {}
        self.labels: list[int] = []
        self._node_min: dict[int, int] = {}
        self._shingle: dict[int, int] = {}

    # ------------------------------------------------------------------

    def node(self, label: int) -> int:
        """Dense id of ``label``, creating a singleton supernode on first sight."""
        idx = self.ids.get(label)
        if idx is None:
            idx = len(self.labels)
            self.ids[label] = idx
            self.labels.append(label)
            self.state.add_node()
        return idx

    def _invalidate_node(self, x: int) -> None:
        self._node_min.pop(x, None)
        self._shingle.pop(self.state.partition.assignment[x], None)

    def node_minhash(self, x: int) -> int:
        val = self._node_min.get(x)
        if val is None:
            nbrs = self.state.adj[x]
            key = self.key
            val = min((hash64(y, key) for y in nbrs), default=NO_NEIGHBORS)
            self._node_min[x] = val
        return val

    def shingle(self, sid: int) -> int:
        val = self._shingle.get(sid)
        if val is None:
            val = min(self.node_minhash(x) for x in self.state.partition.members[sid])
            self._shingle[sid] = val
        return val

    # ------------------------------------------------------------------

    def process(self, ev: StreamEvent) -> None:
        st = self.state
        self.stats.events += 1
        insert = ev.kind is EventKind.INSERT
        if not insert and (ev.src not in self.ids or ev.dst not in self.ids):
            self.stats.ignored += 1
            return
        u, v = self.node(ev.src), self.node(ev.dst)
        if not st.update_edge(u, v, insert):
            self.stats.ignored += 1
            return
        self._invalidate_node(u)
        self._invalidate_node(v)
        if self.sample_size == 0:
            return
        for x in (u, v):
            self._try_moves(x)

    def _try_moves(self, x: int) -> None:
        st = self.state
        assign = st.partition.assignment
        nbrs = sorted(st.adj[x])
        if not nbrs:
            return
        sample = self.rng.sample(nbrs, min(self.sample_size, len(nbrs)))
        shingle = self.shingle
        sh_of: dict[int, int] = {}  # per-sample view, dropped after every move
        for w in sample:
            a = assign[w]
            if not sh_of:
                sh_of = {y: shingle(assign[y]) for y in sample}
            sh = sh_of[w]
            cands = [y for y in sample if y != w and assign[y] != a and sh_of[y] == sh]
            if not cands:
                continue
            y = cands[self.rng.randrange(len(cands))]
            b = assign[y]
            self.stats.attempts += 1
            if not st.improves(st.quick_move_delta(w, b)):
                continue
            plan = st.plan_move(w, b)
            if st.improves(plan.delta):
                before = st.objective() if self.audit else 0.0
                retired = st.apply(plan)
                self.stats.moves += 1
                if self.audit:
                    after = st.objective()
                    change = after - before
                    if not change < 0:
                        raise AssertionError(f"move of {w} into {b} changed the objective by {change}")
                    self.stats.worst_move_delta = max(self.stats.worst_move_delta, change)
                else:
                    self.stats.worst_move_delta = max(self.stats.worst_move_delta, plan.delta)
                if self.keep_move_log:
                    self.stats.move_log.append((self.stats.events, w, a, b, plan.delta))
                self._shingle.pop(a, None)
                self._shingle.pop(b, None)
                sh_of = {}
                if retired is not None:
                    self._shingle.pop(retired, None)

    def run(self, events: Iterable[StreamEvent]) -> "MossoLossy":
        for ev in events:
            self.process(ev)
        return self

    # ------------------------------------------------------------------

    def finalize(self, labels: Sequence[int] | None = None) -> SummaryGraph:
        """Current summary; with ``labels``, subnode ``i`` of the result is ``labels[i]``."""
        s = self.state.to_summary()
        if labels is None:
            return s
        if len(labels) != len(self.labels) or set(labels) != set(self.ids):
            raise ValueError("label order does not cover exactly the nodes seen in the stream")
        assign = s.partition.assignment
        return SummaryGraph(Partition([assign[self.ids[lab]] for lab in labels]), s.superedges, s.model)


def insertion_stream(edges: Iterable[tuple[int, int]]) -> Iterator[StreamEvent]:
    for a, b in edges:
        yield StreamEvent(EventKind.INSERT, a, b)


def shuffled(edges: Sequence[tuple[int, int]], seed: int) -> list[tuple[int, int]]:
    out = list(edges)
    random.Random(derive_key(seed, 0x73687566)).shuffle(out)
    return out
