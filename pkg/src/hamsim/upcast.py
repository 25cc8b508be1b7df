"""Centralized strategy: collect sampled edges at an elected root, solve
locally, distribute the answer.

Steps: elect the minimum id by iterative min-flooding; build a BFS tree
from it; every other node samples ~c' ln n incident edges and pipelines
them up the tree (one record per tree edge per round); the root solves on
the union with the sequential rotation solver and downcasts each cycle
edge to its lower endpoint, routed by DFS-interval labels assigned during
tree setup; a final one-round notification tells the other endpoint.

The root deliberately holds Theta(n log n) words; every other node only
holds its sample, its transit queue, and O(1) labels.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import rng
from .graph import Graph
from .rotation import sequential_rotation_solve
from .runtime import (
    Budgets,
    FailureReason,
    Message,
    MessageKind,
    NodeContext,
    NodeProgram,
    ScopeInfo,
    Simulator,
    bandwidth_bits,
    id_bits,
)
from .verify import HcCertificate


@dataclass
class BfsTree:
    root: int
    parent: np.ndarray          # -1 at the root
    level: np.ndarray
    subtree_size: np.ndarray
    interval: np.ndarray        # DFS label; node owns [interval[v], interval[v]+size)
    children: list[np.ndarray]
    depth: int


def _row_min_over(g: Graph, values: np.ndarray, member_mask: np.ndarray) -> np.ndarray:
    """Per node, min of `values` over neighbors selected by member_mask."""
    out = np.full(g.n, np.inf)
    if g.m == 0:
        return out
    flat = values[g.adj].astype(np.float64)
    flat[~member_mask[g.adj]] = np.inf
    degs = g.degrees()
    nonempty = np.flatnonzero(degs > 0)
    starts = np.minimum(g.indptr[:-1], len(flat) - 1)
    mins = np.minimum.reduceat(flat, starts)
    out[nonempty] = mins[nonempty]
    return out


def elect_leader(sim: Simulator, scope: Optional[ScopeInfo] = None,
                 at: Optional[int] = None) -> tuple[int, int]:
    """Min-id flooding over the whole network; returns (leader, end round).

    Every node starts by announcing its own id; a node re-announces
    whenever its known minimum improves.  Message counts replay that
    process exactly; the span is ecc(leader) + 1 (the final improvers'
    announcements draw no further improvement).
    """
    g = sim.g
    if scope is None:
        scope = sim.make_scope(range(g.n))
    if not scope.connected():
        sim.fail(FailureReason.PARTITION_DISCONNECTED, "leader election on disconnected graph")
    r0 = sim.round if at is None else at
    if g.n == 1:
        return 0, r0
    known = np.arange(g.n, dtype=np.int64)
    sender = np.ones(g.n, dtype=bool)
    degs = g.degrees()
    rounds = 0
    messages = 0
    while sender.any():
        rounds += 1
        messages += int(degs[sender].sum())
        incoming = _row_min_over(g, known, sender)
        improved = incoming < known
        known[improved] = incoming[improved].astype(np.int64)
        sender = improved
    end = sim.charge_exchange(messages, rounds, Message(MessageKind.LEADER_PROBE, (0,)), at=r0)
    leader = int(known[0])
    assert (known == leader).all()
    return leader, end


def build_bfs(sim: Simulator, root: int, scope: Optional[ScopeInfo] = None,
              at: Optional[int] = None) -> tuple[BfsTree, int]:
    """BFS tree + subtree sizes + DFS interval labels, with exact charges.

    Each non-root node picks its parent uniformly at random (from its own
    stream) among its one-level-up neighbors: the uniform choice keeps
    subtree sizes balanced, which the pipelining below depends on.  Wave
    exploration costs depth+1 rounds and one announcement per edge
    direction; the size convergecast and the interval downcast each cost
    depth rounds and n-1 tree messages.  Returns (tree, end round).
    """
    g = sim.g
    if scope is None:
        scope = sim.make_scope(range(g.n))
    dist = scope._dist_row(scope.local[root]).copy()
    if (dist < 0).any():
        sim.fail(FailureReason.PARTITION_DISCONNECTED, "BFS root cannot reach every node")
    depth = int(dist.max())
    parent = np.full(g.n, -1, dtype=np.int64)
    degs = g.degrees()
    if g.m:
        ok = dist[g.adj] == (np.repeat(dist, degs) - 1)
        starts = np.minimum(g.indptr[:-1], len(ok) - 1)
        k = np.add.reduceat(ok, starts)
        k = np.where(degs > 0, k, 0)
        nonroot = (dist > 0) & (k > 0)
        draw = (rng.node_uniform_array(sim.seed, rng.TAG_PARENT, np.arange(g.n))
                * k).astype(np.int64)
        prefix = np.cumsum(ok)
        before = np.where(g.indptr[:-1] > 0, prefix[g.indptr[:-1] - 1], 0)
        rank = before + draw + 1
        pos = np.searchsorted(prefix, rank[nonroot], side="left")
        parent[nonroot] = g.adj[pos]
    sizes = np.ones(g.n, dtype=np.int64)
    for lev in range(depth, 0, -1):
        at_lev = np.flatnonzero(dist == lev)
        np.add.at(sizes, parent[at_lev], sizes[at_lev])
    children: list[np.ndarray] = [np.empty(0, np.int64)] * g.n
    order = np.argsort(parent, kind="stable")
    nonroot_sorted = order[parent[order] >= 0]
    if len(nonroot_sorted):
        bounds = np.flatnonzero(np.diff(parent[nonroot_sorted])) + 1
        for chunk in np.split(nonroot_sorted, bounds):
            children[int(parent[chunk[0]])] = np.sort(chunk)
    interval = np.zeros(g.n, dtype=np.int64)
    stack = [(root, 0)]
    while stack:
        v, base = stack.pop()
        interval[v] = base
        base += 1
        for c in children[v]:
            stack.append((int(c), base))
            base += int(sizes[c])
    r = sim.round if at is None else at
    r = sim.charge_exchange(2 * g.m, depth + 1, Message(MessageKind.BFS_EXPLORE, (depth,)), at=r)
    r = sim.charge_exchange(g.n - 1, max(1, depth), Message(MessageKind.SIZE_REPORT, (1,)), at=r)
    r = sim.charge_exchange(g.n - 1, max(1, depth), Message(MessageKind.SIZE_REPORT, (0, 1)), at=r)
    for v in range(g.n):
        sim.set_gauge(v, "tree", 4 + len(children[v]))
    return BfsTree(root, parent, dist, sizes, interval, children, depth), r


def sample_edges(sim: Simulator, tree: BfsTree, cprime: float) -> dict[int, list[tuple[int, int]]]:
    """Per non-root node: min(ceil(c' ln n), degree) incident edges, drawn
    without replacement from the node's own stream."""
    g = sim.g
    want = max(1, math.ceil(cprime * math.log(max(g.n, 2))))
    out: dict[int, list[tuple[int, int]]] = {}
    for v in range(g.n):
        if v == tree.root:
            continue
        nbrs = [int(w) for w in g.neighbors(v)]
        picked = sim.stream(v, rng.TAG_SAMPLE).sample(nbrs, min(want, len(nbrs)))
        out[v] = [(v, w) for w in picked]
        sim.set_gauge(v, "sample", 2 * len(picked))
    return out


class _UpcastProgram(NodeProgram):
    """Pipelines queued records one-per-round toward the parent; the root
    collects.  Also routes the downcast and the final notifications."""

    def __init__(self, node: int, ctrl: "_UpcastRun"):
        self.node = node
        self.ctrl = ctrl

    def on_round(self, ctx: NodeContext) -> None:
        ctrl = self.ctrl
        me = self.node
        for sender, msg in ctx.inbox:
            if msg.kind == MessageKind.EDGE_RECORD:
                if me == ctrl.tree.root:
                    ctrl.collect_edge(msg.payload[0], msg.payload[1])
                else:
                    ctrl.up_queues[me].append(msg)
            elif msg.kind == MessageKind.HC_ASSIGN and ctrl.phase == "up":
                if me == ctrl.tree.root:
                    ctrl.addr_of[msg.payload[0]] = msg.payload[1]
                else:
                    ctrl.up_queues[me].append(msg)
            elif msg.kind == MessageKind.HC_ASSIGN and ctrl.phase == "down":
                u, v, addr = msg.payload
                if u == me:
                    ctrl.store_hc_edge(me, v)
                    ctrl.notify.setdefault(me, []).append(v)
                else:
                    ctrl.enqueue_down(me, (u, v, addr))
            elif msg.kind == MessageKind.CONTROL and ctrl.phase == "notify":
                ctrl.store_hc_edge(me, sender)
        if ctrl.phase == "up":
            q = ctrl.up_queues.get(me)
            if q:
                ctx.send(int(ctrl.tree.parent[me]), q.popleft())
                ctrl.track_queue(me, len(q))
                if q:
                    ctx.wake()
        elif ctrl.phase == "down":
            more = False
            for child, q in ctrl.down_queues.get(me, {}).items():
                if q:
                    ctx.send(child, Message(MessageKind.HC_ASSIGN, q.popleft()))
                    more = more or bool(q)
            if more:
                ctx.wake()
        elif ctrl.phase == "notify":
            for v in ctrl.notify.get(me, ()):
                ctx.send(v, Message(MessageKind.CONTROL, (3,)))
            ctrl.notify[me] = []


class _UpcastRun:
    def __init__(self, sim: Simulator, tree_holder: dict):
        self.sim = sim
        self._tree_holder = tree_holder
        self.phase = "setup"
        self.up_queues: dict[int, deque] = {}
        self.down_queues: dict[int, dict[int, deque]] = {}
        self.notify: dict[int, list[int]] = {}
        self.collected: set[tuple[int, int]] = set()
        self.addr_of: dict[int, int] = {}
        self.hc_mates: dict[int, list[int]] = {}
        self.queue_peaks: dict[int, int] = {}
        self.cycle: Optional[list[int]] = None

    @property
    def tree(self) -> BfsTree:
        return self._tree_holder["tree"]

    def collect_edge(self, a: int, b: int) -> None:
        self.collected.add((min(a, b), max(a, b)))
        self.sim.set_gauge(self.tree.root, "collected", 2 * len(self.collected))

    def track_queue(self, node: int, qlen: int) -> None:
        if qlen > self.queue_peaks.get(node, 0):
            self.queue_peaks[node] = qlen
        self.sim.set_gauge(node, "queue", 2 * qlen)

    def store_hc_edge(self, node: int, other: int) -> None:
        self.hc_mates.setdefault(node, []).append(other)
        self.sim.set_gauge(node, "hc", 2 * len(self.hc_mates[node]))

    def route_child(self, node: int, addr: int) -> int:
        kids = self.tree.children[node]
        starts = self.tree.interval[kids]
        return int(kids[int(np.searchsorted(starts, addr, side="right")) - 1])

    def enqueue_down(self, node: int, rec: tuple[int, int, int]) -> None:
        child = self.route_child(node, rec[2])
        self.down_queues.setdefault(node, {}).setdefault(child, deque()).append(rec)
        self.sim.wake(node)


def run_upcast(
    g: Graph,
    seed: int,
    cprime: float = 3.0,
    steps_mult: float = 1.0,
    budgets: Optional[Budgets] = None,
    strict: bool = False,
    transcript: Optional[list] = None,
):
    """Full centralized pipeline; returns (report, certificate or None)."""
    sim = Simulator(g, seed, budgets or Budgets.default_for(g.n),
                    strict=strict, transcript=transcript)
    holder: dict = {}
    ctrl = _UpcastRun(sim, holder)
    for v in range(g.n):
        sim.install(v, _UpcastProgram(v, ctrl))

    def setup() -> None:
        sim.begin_phase("setup")
        scope = sim.make_scope(range(g.n))
        leader, r = elect_leader(sim, scope, at=1)
        tree, r = build_bfs(sim, leader, scope, at=r)
        holder["tree"] = tree
        samples = sample_edges(sim, tree, cprime)
        for v, recs in samples.items():
            q = deque()
            q.append(Message(MessageKind.HC_ASSIGN, (v, int(tree.interval[v]))))
            q.extend(Message(MessageKind.EDGE_RECORD, rec) for rec in recs)
            ctrl.up_queues[v] = q
            ctrl.track_queue(v, len(q))
        sim.at_round(r, start_upcast)

    def start_upcast() -> None:
        sim.begin_phase("upcast")
        ctrl.phase = "up"
        nxt = sim.round + 1
        for v in ctrl.up_queues:
            sim.wake(v, nxt)
        sim.at_round(nxt + 1, watch_drain)

    def watch_drain() -> None:
        if (
            all(not q for q in ctrl.up_queues.values())
            and not any(sim._deliveries.values())
        ):
            solve_and_downcast()
            return
        sim.at_round(sim.round + 1, watch_drain)

    def solve_and_downcast() -> None:
        sim.begin_phase("solve")
        tree = ctrl.tree
        root = tree.root
        missing = g.n - 1 - len(ctrl.addr_of)
        if missing:
            sim.fail(FailureReason.ROOT_SOLVE_FAILED,
                     f"{missing} address announcements never arrived")
        edges = sorted(ctrl.collected)
        sampled = Graph.from_edges(g.n, edges)
        sim.set_gauge(root, "solver", 2 * len(edges) + g.n)
        order = sequential_rotation_solve(sampled, stream=sim.stream(root, rng.TAG_SOLVE),
                                          steps_mult=steps_mult)
        if order is None:
            sim.fail(FailureReason.ROOT_SOLVE_FAILED,
                     f"root solver failed on {len(edges)} sampled edges")
        ctrl.cycle = order
        sim.begin_phase("downcast")
        ctrl.phase = "down"
        n = g.n
        for i in range(n):
            a, b = order[i], order[(i + 1) % n]
            u, v = (a, b) if a < b else (b, a)
            if u == root:
                ctrl.store_hc_edge(root, v)
                ctrl.notify.setdefault(root, []).append(v)
            else:
                ctrl.enqueue_down(root, (u, v, ctrl.addr_of[u]))
        sim.at_round(sim.round + 1, watch_down)

    def watch_down() -> None:
        if (
            all(not q for qs in ctrl.down_queues.values() for q in qs.values())
            and not any(sim._deliveries.values())
        ):
            sim.begin_phase("notify")
            ctrl.phase = "notify"
            nxt = sim.round + 1
            for v in list(ctrl.notify):
                if ctrl.notify[v]:
                    sim.wake(v, nxt)
            return
        sim.at_round(sim.round + 1, watch_down)

    sim.at_round(1, setup)
    report = sim.run()

    cert = None
    if report.success and ctrl.cycle is not None:
        mates = np.zeros((g.n, 2), dtype=np.int64)
        complete = True
        for v in range(g.n):
            ms = sorted(ctrl.hc_mates.get(v, []))
            if len(ms) != 2:
                complete = False
                break
            mates[v] = ms
        if complete:
            cert = HcCertificate(g.n, mates)
        else:
            report.success = False
            report.failure_reason = FailureReason.ROOT_SOLVE_FAILED
            report.failure_detail = "downcast left nodes without two cycle edges"
    elif report.success:
        report.success = False
        report.failure_reason = FailureReason.ROOT_SOLVE_FAILED
        report.failure_detail = "quiescent without completing"
    if "tree" in holder:
        tree = holder["tree"]
        report.extras["bfs_depth"] = int(tree.depth)
        report.extras["root"] = int(tree.root)
        report.extras["collected_edges"] = len(ctrl.collected)
        report.extras["queue_peaks"] = dict(ctrl.queue_peaks)
        report.extras["record_bits"] = 2 * id_bits(g.n)
        report.extras["bandwidth_bits"] = bandwidth_bits(g.n)
    return report, cert
