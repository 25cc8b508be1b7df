"""Hamiltonian-cycle certification and small-instance oracles.

A certificate is the distributed output convention: each node names the two
incident edges it believes are on the cycle.  Checking is a global
operation: mutual consistency, degree exactly 2, edges present in the
graph, and a single n-cycle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .graph import Graph


@dataclass
class CheckResult:
    ok: bool
    reason: str = ""          # DegreeViolation | NonEdge | MultipleCycles | Inconsistent
    detail: tuple = ()

    def __bool__(self) -> bool:
        return self.ok


class HcCertificate:
    """Per-node pair of claimed cycle-edge endpoints."""

    def __init__(self, n: int, mates: np.ndarray):
        # mates[v] = the two other endpoints of v's claimed cycle edges
        self.n = n
        self.mates = np.asarray(mates, dtype=np.int64).reshape(n, 2)

    @classmethod
    def from_cycle(cls, order: Sequence[int]) -> "HcCertificate":
        """Build the per-node declarations from an ordered cycle."""
        n = len(order)
        mates = np.empty((n, 2), dtype=np.int64)
        for i, v in enumerate(order):
            a = order[i - 1]
            b = order[(i + 1) % n]
            mates[v] = sorted((a, b))
        return cls(n, mates)

    def cycle_order(self) -> Optional[list[int]]:
        """Walk the declarations from node 0; None if the walk breaks."""
        if self.n == 0:
            return None
        order = [0]
        prev, cur = -1, 0
        for _ in range(self.n - 1):
            a, b = self.mates[cur]
            nxt = int(b) if a == prev else int(a)
            if nxt == prev:
                return None
            order.append(nxt)
            prev, cur = cur, nxt
        return order

    def dump_text(self) -> str:
        lines = [f"{v} {self.mates[v,0]} {self.mates[v,1]}" for v in range(self.n)]
        return "\n".join(lines) + "\n"

    @classmethod
    def load_text(cls, text: str) -> "HcCertificate":
        rows = [ln.split() for ln in text.strip().split("\n") if ln.strip()]
        n = len(rows)
        mates = np.zeros((n, 2), dtype=np.int64)
        seen = set()
        for node_s, a_s, b_s in rows:
            v = int(node_s)
            if v in seen or not 0 <= v < n:
                raise ValueError(f"bad certificate row for node {node_s}")
            seen.add(v)
            mates[v] = (int(a_s), int(b_s))
        return cls(n, mates)


def check_certificate(g: Graph, cert: HcCertificate) -> CheckResult:
    n = g.n
    if cert.n != n:
        return CheckResult(False, "DegreeViolation", (cert.n,))
    if n < 3:
        return CheckResult(False, "DegreeViolation", (n,))
    mates = cert.mates
    for v in range(n):
        a, b = int(mates[v, 0]), int(mates[v, 1])
        if a == b or a == v or b == v or not (0 <= a < n and 0 <= b < n):
            return CheckResult(False, "DegreeViolation", (v,))
        for w in (a, b):
            if not g.has_edge(v, w):
                return CheckResult(False, "NonEdge", (v, w))
            if v not in (int(mates[w, 0]), int(mates[w, 1])):
                return CheckResult(False, "Inconsistent", (v, w))
    # consistent degree-2 subgraph: must be one cycle through all n nodes
    seen = 1
    prev, cur = 0, int(mates[0, 1])
    while cur != 0:
        seen += 1
        if seen > n:
            return CheckResult(False, "MultipleCycles", ())
        a, b = int(mates[cur, 0]), int(mates[cur, 1])
        prev, cur = cur, (b if a == prev else a)
    if seen != n:
        return CheckResult(False, "MultipleCycles", (seen,))
    return CheckResult(True)


def cycle_order_is_hc(g: Graph, order: Sequence[int]) -> bool:
    """Oracle: the sequence visits every node once and all hops are edges."""
    n = g.n
    if len(order) != n or len(set(order)) != n or n < 3:
        return False
    return all(g.has_edge(int(order[i]), int(order[(i + 1) % n])) for i in range(n))


_BRUTE_LIMIT = 14


def brute_force_hamiltonian(g: Graph) -> Optional[list[int]]:
    """Exact search for one Hamiltonian cycle, n <= 14 only.

    Held-Karp style reachability over vertex subsets: dp[mask][v] holds a
    predecessor when a path 0->..->v covering mask exists.
    """
    n = g.n
    if n > _BRUTE_LIMIT:
        raise ValueError(f"brute force limited to n <= {_BRUTE_LIMIT}")
    if n < 3:
        return None
    full = (1 << n) - 1
    nbr_bits = [0] * n
    for v in range(n):
        for w in g.neighbors(v):
            nbr_bits[v] |= 1 << int(w)
    pred: dict[tuple[int, int], int] = {(1, 0): -1}
    frontier = {(1, 0)}
    for _ in range(n - 1):
        nxt = set()
        for mask, v in frontier:
            free = nbr_bits[v] & ~mask
            while free:
                wbit = free & -free
                free ^= wbit
                w = wbit.bit_length() - 1
                key = (mask | wbit, w)
                if key not in pred:
                    pred[key] = v
                    nxt.add(key)
        frontier = nxt
        if not frontier:
            return None
    for v in range(1, n):
        if (full, v) in pred and g.has_edge(v, 0):
            path = []
            mask, cur = full, v
            while cur != -1:
                path.append(cur)
                mask, cur = mask ^ (1 << cur), pred[(mask, cur)]
            path.reverse()
            return path
    return None
