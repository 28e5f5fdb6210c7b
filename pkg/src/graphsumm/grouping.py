"""Min-hash grouping of supernodes with similar connectivity.

A supernode's shingle is the minimum, over the neighbors of its members, of a
seeded bijective 64-bit hash of the neighbor id.  Supernodes sharing a shingle
form a group; oversized groups are re-split with fresh seeds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import InputGraph, Partition

MASK64 = (1 << 64) - 1
NO_NEIGHBORS = MASK64  # shingle of a supernode without any neighbor
MAX_SPLIT_DEPTH = 8


@dataclass(frozen=True)
class GroupingConfig:
    max_group_size: int = 300
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_group_size < 2:
            raise ValueError("max_group_size must be at least 2")


def derive_key(*parts: int) -> int:
    """64-bit hashing key from a seed path (e.g. ``seed, iteration, depth``)."""
    seq = np.random.SeedSequence([int(p) & MASK64 for p in parts])
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def hash64(x: int, key: int) -> int:
    """splitmix64 finalizer of ``x ^ key``: a seeded permutation of 64-bit ints."""
    z = (x ^ key) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def hash64_array(x: np.ndarray, key: int) -> np.ndarray:
    z = x.astype(np.uint64) ^ np.uint64(key)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def node_minhash(g: InputGraph, key: int) -> np.ndarray:
    """Per-subnode minimum hash over its neighbors (``NO_NEIGHBORS`` if isolated)."""
    indptr, indices = g.csr()
    out = np.full(g.node_count, np.uint64(NO_NEIGHBORS), dtype=np.uint64)
    if len(indices) == 0:
        return out
    h = hash64_array(indices, key)
    has = np.diff(indptr) > 0
    starts = indptr[:-1][has]
    out[has] = np.minimum.reduceat(h, starts)
    return out


def supernode_shingles(g: InputGraph, p: Partition, key: int, sids=None) -> dict[int, int]:
    nodemin = node_minhash(g, key)
    sids = p.supernodes() if sids is None else sids
    out = {}
    for sid in sids:
        members = np.fromiter(p.members_of(sid), dtype=np.int64)
        out[sid] = int(nodemin[members].min())
    return out


def group_supernodes(g: InputGraph, p: Partition, cfg: GroupingConfig, iteration: int = 0) -> list[list[int]]:
    """Disjoint groups of live supernodes, ordered by shingle; singletons dropped.

    Groups larger than ``cfg.max_group_size`` are re-grouped with a fresh key,
    up to ``MAX_SPLIT_DEPTH`` levels; anything still too large (e.g. supernodes
    with identical neighborhoods) is cut into consecutive id-ordered chunks.
    """
    nodemin_cache: dict[int, np.ndarray] = {}
    assign = np.asarray(p.assignment, dtype=np.int64)

    def shingles(key: int, sids: np.ndarray) -> np.ndarray:
        if key not in nodemin_cache:
            nodemin_cache[key] = node_minhash(g, key)
        nodemin = nodemin_cache[key]
        # min over members, computed once for all requested supernodes
        mask = np.isin(assign, sids)
        nodes = np.nonzero(mask)[0]
        owner = assign[nodes]
        order = np.argsort(owner, kind="stable")
        owner = owner[order]
        vals = nodemin[nodes[order]]
        uniq, starts = np.unique(owner, return_index=True)
        mins = np.minimum.reduceat(vals, starts)
        lookup = dict(zip(uniq.tolist(), mins.tolist()))
        return np.array([lookup[s] for s in sids.tolist()], dtype=np.uint64)

    groups: list[list[int]] = []

    def split(sids: np.ndarray, depth: int, path: tuple[int, ...]) -> None:
        key = derive_key(cfg.rng_seed, iteration, depth, *path)
        sh = shingles(key, sids)
        order = np.lexsort((sids, sh))
        sids, sh = sids[order], sh[order]
        bounds = np.flatnonzero(np.diff(sh)) + 1
        for idx, chunk in enumerate(np.split(sids, bounds)):
            if len(chunk) < 2:
                continue
            if len(chunk) <= cfg.max_group_size:
                groups.append(sorted(chunk.tolist()))
            elif depth + 1 < MAX_SPLIT_DEPTH:
                split(chunk, depth + 1, path + (idx,))
            else:
                ids = sorted(chunk.tolist())
                for k in range(0, len(ids), cfg.max_group_size):
                    piece = ids[k:k + cfg.max_group_size]
                    if len(piece) >= 2:
                        groups.append(piece)

    live = np.array(p.supernodes(), dtype=np.int64)
    if len(live):
        split(live, 0, ())
    return groups
