"""G(n,p) generation and immutable adjacency queries.

Graphs are stored CSR-style (offset array + flat sorted neighbor array) so
that large instances stay cheap to hold and slice.  Edge presence is an
independent Bernoulli(p) draw per unordered pair, keyed by
(seed, min(u,v), max(u,v)): the same parameters always reproduce the same
graph, independent of iteration order.
"""

from __future__ import annotations

from dataclasses import dataclass
from collections import deque
from typing import Iterable

import numpy as np

from . import rng


@dataclass(frozen=True)
class GnpParams:
    n: int
    p: float
    seed: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must be in [0, 1]")


class Graph:
    """Immutable undirected simple graph with sorted adjacency."""

    __slots__ = ("n", "m", "indptr", "adj", "_eu", "_ev", "_flat_keys")

    def __init__(self, n: int, eu: np.ndarray, ev: np.ndarray):
        # eu/ev: endpoint arrays with eu < ev, duplicate-free
        self.n = n
        self.m = len(eu)
        srcs = np.concatenate([eu, ev]).astype(np.int64)
        dsts = np.concatenate([ev, eu]).astype(np.int64)
        order = np.lexsort((dsts, srcs))
        self.adj = dsts[order].astype(np.int32)
        deg = np.bincount(srcs, minlength=n) if self.m else np.zeros(n, dtype=np.int64)
        self.indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(deg, out=self.indptr[1:])
        self._eu = np.asarray(eu, dtype=np.int32)
        self._ev = np.asarray(ev, dtype=np.int32)
        self._flat_keys = None

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]]) -> "Graph":
        pairs = set()
        for u, v in edges:
            if u == v:
                raise ValueError("self-loops not allowed")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError("endpoint out of range")
            pairs.add((min(u, v), max(u, v)))
        if pairs:
            arr = np.array(sorted(pairs), dtype=np.int32)
            return cls(n, arr[:, 0], arr[:, 1])
        return cls(n, np.empty(0, np.int32), np.empty(0, np.int32))

    def neighbors(self, v: int) -> np.ndarray:
        return self.adj[self.indptr[v]:self.indptr[v + 1]]

    def degree(self, v: int) -> int:
        return int(self.indptr[v + 1] - self.indptr[v])

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def has_edge(self, u: int, v: int) -> bool:
        row = self.neighbors(u)
        i = int(np.searchsorted(row, v))
        return i < len(row) and row[i] == v

    def has_edges(self, us: np.ndarray, vs: np.ndarray) -> np.ndarray:
        """Vectorized membership test for many (u, v) pairs."""
        us = np.asarray(us, dtype=np.int64)
        vs = np.asarray(vs, dtype=np.int64)
        if self._flat_keys is None:
            row_of = np.repeat(np.arange(self.n, dtype=np.int64), self.degrees())
            keys64 = row_of * self.n + self.adj
            # n*n fits in int32 up to n ~ 46k; halves the cache footprint
            self._flat_keys = keys64.astype(np.int32) if self.n < 46341 else keys64
        keys = us * self.n + vs
        keys = keys.astype(self._flat_keys.dtype)
        pos = np.searchsorted(self._flat_keys, keys)
        ok = pos < len(self._flat_keys)
        out = np.zeros(len(keys), dtype=bool)
        out[ok] = self._flat_keys[pos[ok]] == keys[ok]
        return out

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return self._eu, self._ev

    def edges(self) -> Iterable[tuple[int, int]]:
        order = np.lexsort((self._ev, self._eu))
        for i in order:
            yield int(self._eu[i]), int(self._ev[i])


def generate_gnp(params: GnpParams) -> Graph:
    """Sample G(n, p); bit-identical for identical params."""
    n, p, seed = params.n, params.p, params.seed
    if n == 1 or p == 0.0:
        return Graph(n, np.empty(0, np.int32), np.empty(0, np.int32))
    eus, evs = [], []
    for u in range(n - 1):
        vs = np.arange(u + 1, n, dtype=np.int64)
        hit = rng.pair_uniform_row(seed, u, vs) < p
        picked = vs[hit]
        if len(picked):
            eus.append(np.full(len(picked), u, dtype=np.int32))
            evs.append(picked.astype(np.int32))
    if not eus:
        return Graph(n, np.empty(0, np.int32), np.empty(0, np.int32))
    return Graph(n, np.concatenate(eus), np.concatenate(evs))


class SubgraphView:
    """Read-only induced-subgraph view; the parent graph is untouched."""

    def __init__(self, g: Graph, members: Iterable[int]):
        self.parent = g
        self.members = np.array(sorted(set(int(m) for m in members)), dtype=np.int64)
        if len(self.members) and (self.members[0] < 0 or self.members[-1] >= g.n):
            raise ValueError("members outside parent graph")
        self._mask = np.zeros(g.n, dtype=bool)
        self._mask[self.members] = True

    @property
    def n(self) -> int:
        return len(self.members)

    def contains(self, v: int) -> bool:
        return bool(self._mask[v])

    def neighbors(self, v: int) -> np.ndarray:
        if not self._mask[v]:
            raise KeyError(v)
        row = self.parent.neighbors(v)
        return row[self._mask[row]]

    def edges(self) -> Iterable[tuple[int, int]]:
        for u in self.members:
            for v in self.neighbors(int(u)):
                if u < v:
                    yield int(u), int(v)

    def edge_count(self) -> int:
        return sum(1 for _ in self.edges())


def induced_subgraph(g: Graph, members: Iterable[int]) -> SubgraphView:
    return SubgraphView(g, members)


def bfs_levels(g: Graph | SubgraphView, root: int) -> dict[int, int]:
    """Level of every node reachable from root; unreachable nodes absent."""
    levels = {root: 0}
    q = deque([root])
    while q:
        v = q.popleft()
        lv = levels[v] + 1
        for w in g.neighbors(v):
            w = int(w)
            if w not in levels:
                levels[w] = lv
                q.append(w)
    return levels


def eccentricity(g: Graph | SubgraphView, v: int) -> int:
    return max(bfs_levels(g, v).values())


def diameter(g: Graph) -> int | None:
    """Max BFS eccentricity; None when the graph is disconnected."""
    if g.n == 0:
        return None
    best = 0
    for v in range(g.n):
        levels = bfs_levels(g, v)
        if len(levels) != g.n:
            return None
        best = max(best, max(levels.values()))
    return best


def dump_text(g: Graph) -> str:
    """Line 1: "n m"; then one "u v" line per edge, u < v, lexicographic."""
    lines = [f"{g.n} {g.m}"]
    lines.extend(f"{u} {v}" for u, v in g.edges())
    return "\n".join(lines) + "\n"


def load_text(text: str) -> Graph:
    lines = text.strip().split("\n") if text.strip() else []
    if not lines:
        raise ValueError("empty graph dump")
    n, m = (int(x) for x in lines[0].split())
    edges = []
    for ln in lines[1 : m + 1]:
        u, v = (int(x) for x in ln.split())
        if not u < v:
            raise ValueError(f"dump edges must satisfy u < v, got {u} {v}")
        edges.append((u, v))
    if len(edges) != m:
        raise ValueError("edge count mismatch")
    return Graph.from_edges(n, edges)
