"""Input graphs, partitions and summary graphs.

Subnodes are densified to ``0..n-1`` at load time; the original labels are kept
on :attr:`InputGraph.labels`.  A summary graph is a partition of the subnodes
into supernodes plus a set of superedges, each carrying the number of input
edges it covers.  The weighted model reconstructs a superedge ``{A, B}`` as
fractional weight ``count / pairs(A, B)``; the unweighted model as weight 1.
"""

from __future__ import annotations

import enum
import gzip
import io
import os
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Sequence

import numpy as np

MATERIALIZE_CAP = 2000


class Model(str, enum.Enum):
    WEIGHTED = "weighted"
    UNWEIGHTED = "unweighted"


class EdgeListError(ValueError):
    """Raised for unparsable or empty edge lists."""


class SummaryFormatError(ValueError):
    """Raised when a SUMM file is malformed or inconsistent with its header."""


def pair_count(size_a: int, size_b: int | None = None) -> int:
    """Possible subnode pairs between two supernodes (within one if ``size_b`` is None)."""
    if size_b is None:
        return size_a * (size_a - 1) // 2
    return size_a * size_b


# --------------------------------------------------------------------------
# input graph


@dataclass
class LoadStats:
    lines: int = 0
    comments: int = 0
    blank: int = 0
    self_loops: int = 0
    duplicates: int = 0


class InputGraph:
    """Immutable undirected simple graph with sorted adjacency lists."""

    def __init__(self, node_count: int, edges: Iterable[tuple[int, int]], labels=None):
        adj: list[set[int]] = [set() for _ in range(node_count)]
        for u, v in edges:
            if u == v:
                raise ValueError(f"self-loop on node {u}")
            if not (0 <= u < node_count and 0 <= v < node_count):
                raise ValueError(f"edge ({u}, {v}) outside 0..{node_count - 1}")
            adj[u].add(v)
            adj[v].add(u)
        self._adj = tuple(tuple(sorted(a)) for a in adj)
        self.node_count = node_count
        self.edge_count = sum(len(a) for a in self._adj) // 2
        self.labels = list(range(node_count)) if labels is None else list(labels)
        self.load_stats: LoadStats | None = None
        self.file_order: list[tuple[int, int]] | None = None
        self._csr = None

    def neighbors(self, i: int) -> tuple[int, ...]:
        return self._adj[i]

    def degree(self, i: int) -> int:
        return len(self._adj[i])

    def has_edge(self, i: int, j: int) -> bool:
        nbrs = self._adj[i]
        k = _bisect(nbrs, j)
        return k < len(nbrs) and nbrs[k] == j

    def edges(self) -> Iterator[tuple[int, int]]:
        """Each undirected edge once, as ``(u, v)`` with ``u < v``."""
        for u, nbrs in enumerate(self._adj):
            for v in nbrs:
                if v > u:
                    yield u, v

    def edge_array(self) -> np.ndarray:
        """``(m, 2)`` int64 array of edges with ``u < v``."""
        indptr, indices = self.csr()
        rows = np.repeat(np.arange(self.node_count, dtype=np.int64), np.diff(indptr))
        mask = indices > rows
        return np.stack([rows[mask], indices[mask]], axis=1)

    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        if self._csr is None:
            degs = np.fromiter((len(a) for a in self._adj), dtype=np.int64, count=self.node_count)
            indptr = np.zeros(self.node_count + 1, dtype=np.int64)
            np.cumsum(degs, out=indptr[1:])
            indices = np.fromiter(
                (v for a in self._adj for v in a), dtype=np.int64, count=int(indptr[-1])
            )
            self._csr = (indptr, indices)
        return self._csr

    def adjacency_matrix(self):
        """Symmetric 0/1 ``scipy.sparse.csr_matrix``."""
        from scipy import sparse

        indptr, indices = self.csr()
        data = np.ones(len(indices), dtype=np.float64)
        n = self.node_count
        return sparse.csr_matrix((data, indices, indptr), shape=(n, n))

    def __repr__(self) -> str:
        return f"InputGraph(|V|={self.node_count}, |E|={self.edge_count})"


def _bisect(seq: Sequence[int], x: int) -> int:
    lo, hi = 0, len(seq)
    while lo < hi:
        mid = (lo + hi) // 2
        if seq[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    return lo


@dataclass(frozen=True)
class LoadOptions:
    comment_prefix: str = "#"
    # also accept '%' comments (Matrix Market / KONECT headers)
    extra_comment_prefixes: tuple[str, ...] = ("%",)
    # stop after this many distinct edges (e.g. a prefix of a large stream)
    max_edges: int | None = None


def _open_text(source) -> IO[str]:
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(source.decode("utf-8"))
    if isinstance(source, (str, os.PathLike)):
        path = os.fspath(source)
        if path.endswith(".gz"):
            return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8")
        return open(path, encoding="utf-8")
    if isinstance(source, io.TextIOBase):
        return source
    # binary stream
    return io.TextIOWrapper(source, encoding="utf-8")


def load_edge_list(source, options: LoadOptions | None = None) -> InputGraph:
    """Parse a whitespace-separated edge list into an :class:`InputGraph`.

    ``source`` is a path (``.gz`` is decompressed), raw bytes, or a text/binary
    stream.  Self-loops are dropped and duplicate or reversed edges collapse to
    one; counts of both land in ``graph.load_stats``.  Node ids are densified in
    order of first appearance, and ``graph.file_order`` keeps the distinct edges
    in the order they were read.
    """
    options = options or LoadOptions()
    prefixes = (options.comment_prefix, *options.extra_comment_prefixes)
    stats = LoadStats()
    ids: dict[int, int] = {}
    seen: set[tuple[int, int]] = set()
    edges: list[tuple[int, int]] = []

    fh = _open_text(source)
    try:
        for lineno, line in enumerate(fh, start=1):
            stats.lines += 1
            text = line.strip()
            if not text:
                stats.blank += 1
                continue
            if text.startswith(prefixes):
                stats.comments += 1
                continue
            parts = text.split()
            if len(parts) < 2:
                raise EdgeListError(f"line {lineno}: expected two node ids, got {text!r}")
            try:
                a, b = int(parts[0]), int(parts[1])
            except ValueError:
                raise EdgeListError(f"line {lineno}: non-integer token in {text!r}") from None
            if a < 0 or b < 0:
                raise EdgeListError(f"line {lineno}: negative node id in {text!r}")
            u = ids.setdefault(a, len(ids))
            v = ids.setdefault(b, len(ids))
            if u == v:
                stats.self_loops += 1
                continue
            key = (u, v) if u < v else (v, u)
            if key in seen:
                stats.duplicates += 1
                continue
            seen.add(key)
            edges.append(key)
            if options.max_edges is not None and len(edges) >= options.max_edges:
                break
    finally:
        if fh is not source:
            fh.close()

    if not ids:
        raise EdgeListError("empty input: no edges found")
    labels = [0] * len(ids)
    for raw, dense in ids.items():
        labels[dense] = raw
    graph = InputGraph(len(ids), edges, labels=labels)
    graph.load_stats = stats
    graph.file_order = edges
    return graph


# --------------------------------------------------------------------------
# partition


class Partition:
    """Assignment of subnodes to supernodes.

    Supernode ids are never reused: a merge keeps the id of the larger side
    and retires the other one.
    """

    def __init__(self, assignment: Sequence[int] = ()):
        self.assignment: list[int] = list(assignment)
        self.members: dict[int, set[int]] = {}
        for node, sid in enumerate(self.assignment):
            if sid < 0:
                raise ValueError(f"negative supernode id {sid}")
            self.members.setdefault(sid, set()).add(node)
        self._next_id = max(self.members, default=-1) + 1
        self._retired: set[int] = set()

    @classmethod
    def singletons(cls, n: int) -> "Partition":
        return cls(range(n))

    @property
    def node_count(self) -> int:
        return len(self.assignment)

    @property
    def live_supernode_count(self) -> int:
        return len(self.members)

    def supernode_of(self, node: int) -> int:
        return self.assignment[node]

    def members_of(self, sid: int) -> set[int]:
        try:
            return self.members[sid]
        except KeyError:
            raise KeyError(f"supernode {sid} is not live") from None

    def size(self, sid: int) -> int:
        return len(self.members_of(sid))

    def supernodes(self) -> list[int]:
        return sorted(self.members)

    def is_live(self, sid: int) -> bool:
        return sid in self.members

    def add_node(self) -> int:
        """Append a new subnode in a fresh singleton supernode; returns the supernode id."""
        node = len(self.assignment)
        sid = self._next_id
        self._next_id += 1
        self.assignment.append(sid)
        self.members[sid] = {node}
        return sid

    def merge(self, a: int, b: int) -> tuple[int, int]:
        """Merge two live supernodes; returns ``(survivor, retired)``."""
        if a == b:
            raise ValueError("cannot merge a supernode with itself")
        ma, mb = self.members_of(a), self.members_of(b)
        if len(ma) > len(mb) or (len(ma) == len(mb) and a < b):
            keep, gone = a, b
        else:
            keep, gone = b, a
        moved = self.members.pop(gone)
        for node in moved:
            self.assignment[node] = keep
        self.members[keep] |= moved
        self._retired.add(gone)
        return keep, gone

    def move(self, node: int, target: int) -> int | None:
        """Move one subnode into ``target``; returns the retired id if its old supernode emptied."""
        src = self.assignment[node]
        if target == src:
            return None
        self.members_of(target).add(node)
        self.members[src].discard(node)
        self.assignment[node] = target
        if not self.members[src]:
            del self.members[src]
            self._retired.add(src)
            return src
        return None

    def copy(self) -> "Partition":
        other = Partition.__new__(Partition)
        other.assignment = list(self.assignment)
        other.members = {k: set(v) for k, v in self.members.items()}
        other._next_id = self._next_id
        other._retired = set(self._retired)
        return other

    def validate(self) -> None:
        seen = 0
        for sid, nodes in self.members.items():
            if not nodes:
                raise AssertionError(f"empty supernode {sid}")
            for node in nodes:
                if self.assignment[node] != sid:
                    raise AssertionError(f"node {node} assigned to {self.assignment[node]}, listed in {sid}")
            seen += len(nodes)
        if seen != len(self.assignment):
            raise AssertionError("supernodes do not cover every subnode exactly once")


# --------------------------------------------------------------------------
# summary graph


@dataclass(frozen=True)
class SupernodePairStats:
    subedge_count: int
    pair_count: int


def _key(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a <= b else (b, a)


@dataclass
class SummaryGraph:
    partition: Partition
    superedges: dict[tuple[int, int], int] = field(default_factory=dict)
    model: Model = Model.UNWEIGHTED

    def __post_init__(self):
        self.model = Model(self.model)
        self.superedges = {_key(a, b): c for (a, b), c in self.superedges.items()}
        self._incident: dict[int, list[int]] | None = None

    @classmethod
    def identity(cls, g: InputGraph, model: Model | str) -> "SummaryGraph":
        return cls(Partition.singletons(g.node_count), {e: 1 for e in g.edges()}, Model(model))

    @property
    def node_count(self) -> int:
        return self.partition.node_count

    @property
    def supernode_count(self) -> int:
        return self.partition.live_supernode_count

    @property
    def superedge_count(self) -> int:
        return len(self.superedges)

    @property
    def max_count(self) -> int:
        return max(self.superedges.values(), default=0)

    def has_superedge(self, a: int, b: int) -> bool:
        return _key(a, b) in self.superedges

    def count(self, a: int, b: int) -> int:
        return self.superedges.get(_key(a, b), 0)

    def pairs(self, a: int, b: int) -> int:
        p = self.partition
        return pair_count(p.size(a)) if a == b else p.size(a) * p.size(b)

    def incident(self, sid: int) -> list[int]:
        """Supernodes joined to ``sid`` by a superedge (``sid`` itself for a self-loop)."""
        if self._incident is None:
            inc: dict[int, list[int]] = {}
            for a, b in sorted(self.superedges):
                inc.setdefault(a, []).append(b)
                if a != b:
                    inc.setdefault(b, []).append(a)
            self._incident = inc
        return self._incident.get(sid, [])

    def superedge_weight(self, a: int, b: int) -> float:
        """Reconstructed subedge weight of superedge ``{a, b}`` (0 if absent)."""
        key = _key(a, b)
        if key not in self.superedges:
            return 0.0
        if self.model is Model.UNWEIGHTED:
            return 1.0
        return self.superedges[key] / self.pairs(a, b)

    def with_superedges(self, superedges: dict[tuple[int, int], int]) -> "SummaryGraph":
        return SummaryGraph(self.partition, dict(superedges), self.model)

    def validate(self, g: InputGraph | None = None) -> None:
        """Check the structural invariants; with ``g``, also that counts equal E_AB."""
        self.partition.validate()
        for (a, b), c in self.superedges.items():
            if not (self.partition.is_live(a) and self.partition.is_live(b)):
                raise AssertionError(f"superedge {(a, b)} has a dead endpoint")
            if c < 1:
                raise AssertionError(f"superedge {(a, b)} stores count {c}")
            if c > self.pairs(a, b):
                raise AssertionError(f"superedge {(a, b)} count {c} exceeds pair count")
        if g is not None:
            if g.node_count != self.node_count:
                raise AssertionError("summary and graph disagree on |V|")
            counts = block_edge_counts(g, self.partition)
            for key, c in self.superedges.items():
                if counts.get(key, 0) != c:
                    raise AssertionError(f"superedge {key} stores {c}, graph has {counts.get(key, 0)}")


def block_edge_counts(g: InputGraph, partition: Partition) -> dict[tuple[int, int], int]:
    """E_AB for every supernode pair joined by at least one input edge."""
    counts: dict[tuple[int, int], int] = {}
    assign = partition.assignment
    for u, v in g.edges():
        key = _key(assign[u], assign[v])
        counts[key] = counts.get(key, 0) + 1
    return counts


def pair_stats(g: InputGraph, p: Partition, a: int, b: int) -> SupernodePairStats:
    ma, mb = p.members_of(a), p.members_of(b)
    assign = p.assignment
    hits = 0
    for u in ma:
        for v in g.neighbors(u):
            if assign[v] == b:
                hits += 1
    if a == b:
        return SupernodePairStats(hits // 2, pair_count(len(ma)))
    return SupernodePairStats(hits, len(ma) * len(mb))


def reconstructed_weight(s: SummaryGraph, i: int, j: int) -> float:
    n = s.node_count
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"subnode out of range 0..{n - 1}")
    if i == j:
        return 0.0
    return s.superedge_weight(s.partition.assignment[i], s.partition.assignment[j])


def materialize(s: SummaryGraph, cap: int = MATERIALIZE_CAP) -> np.ndarray:
    """Dense reconstructed adjacency; for testing on small graphs only."""
    n = s.node_count
    if n > cap:
        raise ValueError(f"refusing to materialize {n} nodes (cap {cap})")
    out = np.zeros((n, n), dtype=np.float64)
    members = {sid: np.fromiter(sorted(m), dtype=np.int64) for sid, m in s.partition.members.items()}
    for a, b in s.superedges:
        w = s.superedge_weight(a, b)
        out[np.ix_(members[a], members[b])] = w
        out[np.ix_(members[b], members[a])] = w
    np.fill_diagonal(out, 0.0)
    return out


def reconstructed_edge_count(s: SummaryGraph) -> int:
    return sum(s.pairs(a, b) for a, b in s.superedges)


# --------------------------------------------------------------------------
# SUMM v1 files


def write_summary(s: SummaryGraph, dest) -> None:
    """Write the SUMM v1 text format to a path or text stream."""
    text = dumps_summary(s)
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        dest.write(text)


def dumps_summary(s: SummaryGraph) -> str:
    out = [f"SUMM v1 {s.model.value} {s.node_count} {s.supernode_count} {s.superedge_count}"]
    out.extend(f"n {node} {sid}" for node, sid in enumerate(s.partition.assignment))
    out.extend(f"e {a} {b} {c}" for (a, b), c in sorted(s.superedges.items()))
    return "\n".join(out) + "\n"


def read_summary(source) -> SummaryGraph:
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8") as fh:
            return loads_summary(fh.read())
    return loads_summary(source.read())


def loads_summary(text: str) -> SummaryGraph:
    lines = text.splitlines()
    if not lines:
        raise SummaryFormatError("empty summary file")
    head = lines[0].split()
    if len(head) != 6 or head[:2] != ["SUMM", "v1"]:
        raise SummaryFormatError(f"bad header {lines[0]!r}")
    try:
        model = Model(head[2])
        n, n_super, n_edges = (int(x) for x in head[3:])
    except ValueError as exc:
        raise SummaryFormatError(f"bad header {lines[0]!r}: {exc}") from None
    body = lines[1:]
    if len(body) != n + n_edges:
        raise SummaryFormatError(f"expected {n + n_edges} body lines, found {len(body)}")
    assignment = [-1] * n
    for k, line in enumerate(body[:n], start=2):
        parts = line.split()
        if len(parts) != 3 or parts[0] != "n":
            raise SummaryFormatError(f"line {k}: expected 'n <subnode> <supernode>'")
        node, sid = int(parts[1]), int(parts[2])
        if not 0 <= node < n or assignment[node] != -1:
            raise SummaryFormatError(f"line {k}: bad or repeated subnode {node}")
        assignment[node] = sid
    partition = Partition(assignment)
    if partition.live_supernode_count != n_super:
        raise SummaryFormatError(
            f"header says {n_super} supernodes, assignment has {partition.live_supernode_count}"
        )
    superedges: dict[tuple[int, int], int] = {}
    for k, line in enumerate(body[n:], start=n + 2):
        parts = line.split()
        if len(parts) != 4 or parts[0] != "e":
            raise SummaryFormatError(f"line {k}: expected 'e <A> <B> <count>'")
        a, b, c = int(parts[1]), int(parts[2]), int(parts[3])
        key = _key(a, b)
        if key in superedges:
            raise SummaryFormatError(f"line {k}: repeated superedge {key}")
        superedges[key] = c
    s = SummaryGraph(partition, superedges, model)
    try:
        s.validate()
    except (AssertionError, KeyError) as exc:
        raise SummaryFormatError(str(exc)) from None
    return s
