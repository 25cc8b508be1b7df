"""Synchronous-round bandwidth-limited network executor.

Execution model: all nodes share a global round counter.  A message sent
while processing round r arrives at the end of round r and is readable by
its receiver in round r+1.  Each edge carries at most one message per
direction per round, and every message must fit the per-round bandwidth
(tag plus four id-sized fields).

Point-to-point sends are materialized and checked individually.  The two
scoped dissemination services (flood broadcast and counting convergecast)
are charged exactly (rounds = eccentricity-based span, messages = tree
edges) and can additionally materialize their per-hop messages in strict
mode, where they pass through the same per-edge-per-round occupancy check
as ordinary sends.  Strict mode is the reference semantics; fast mode
produces identical reports and is used at scale.

The executor is event driven: only nodes with a delivery or an explicit
wakeup run in a given round, and the round cursor jumps over quiet spans.
Determinism: nodes are processed in id order, inboxes are sorted by
sender, and all randomness comes from counter-based per-node streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Callable, Iterable, Optional

import numpy as np

from . import rng
from .graph import Graph

TAG_BITS = 4  # 12 message kinds fit in 4 bits


class MessageKind(IntEnum):
    PROGRESS = 0
    ROTATION = 1
    VERIFY = 2
    VERIFIED = 3
    BUILD_BRIDGE = 4
    RENUMBER = 5
    LEADER_PROBE = 6
    BFS_EXPLORE = 7
    EDGE_RECORD = 8
    HC_ASSIGN = 9
    SIZE_REPORT = 10
    CONTROL = 11


@dataclass(frozen=True)
class Message:
    kind: MessageKind
    payload: tuple[int, ...] = ()

    def size_bits(self, n: int) -> int:
        return TAG_BITS + len(self.payload) * id_bits(n)


def id_bits(n: int) -> int:
    return max(1, math.ceil(math.log2(n))) if n > 1 else 1


def bandwidth_bits(n: int) -> int:
    return TAG_BITS + 4 * id_bits(n)


class FailureReason(Enum):
    UNUSED_EXHAUSTED = "UnusedExhausted"
    PARTITION_DISCONNECTED = "PartitionDisconnected"
    ROOT_SOLVE_FAILED = "RootSolveFailed"
    STEP_BUDGET_EXCEEDED = "StepBudgetExceeded"
    NO_BRIDGE_FOUND = "NoBridgeFound"
    HYPERNODE_GRAPH_DISCONNECTED = "HypernodeGraphDisconnected"


@dataclass
class Budgets:
    max_rounds: Optional[int] = None
    max_steps: Optional[int] = None   # global cap; per-instance caps live in the engines
    steps_mult: float = 1.0

    @staticmethod
    def default_for(n: int) -> "Budgets":
        ln = math.log(max(n, 2))
        return Budgets(max_rounds=max(64, math.ceil(64 * n * ln * ln)))


def dra_step_budget(size: int, mult: float = 1.0) -> int:
    """Step allowance for one rotation instance over `size` nodes."""
    if size < 2:
        return 1
    return math.ceil(7 * size * math.log(size) * mult)


@dataclass
class SimulationReport:
    rounds: int
    steps: int
    messages: int
    peak_memory_words: dict[int, int]
    success: bool
    failure_reason: Optional[FailureReason] = None
    failure_detail: str = ""
    phase_rounds: dict[str, int] = field(default_factory=dict)
    congest_checks: int = 0
    congest_violations: int = 0
    extras: dict = field(default_factory=dict)

    def summary(self) -> str:
        tail = "ok" if self.success else f"fail:{self.failure_reason.value if self.failure_reason else '?'}"
        return (f"rounds={self.rounds} steps={self.steps} messages={self.messages} {tail}")


def grouped_ranges(starts: np.ndarray, stops: np.ndarray) -> np.ndarray:
    """Concatenation of arange(starts[i], stops[i]) without a Python loop."""
    lens = stops - starts
    keep = lens > 0
    starts, lens = starts[keep], lens[keep]
    total = int(lens.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    out = np.ones(total, dtype=np.int64)
    out[0] = starts[0]
    offs = np.cumsum(lens)[:-1]
    out[offs] = starts[1:] - (starts[:-1] + lens[:-1] - 1)
    return np.cumsum(out)


class ScopeInfo:
    """Induced-subgraph structure for one member set: local CSR + distances."""

    def __init__(self, g: Graph, members: Iterable[int]):
        self.g = g
        if isinstance(members, np.ndarray):
            self.members = np.unique(members.astype(np.int64))
        else:
            self.members = np.array(sorted(set(int(v) for v in members)), dtype=np.int64)
        s = len(self.members)
        self.size = s
        self.local = {int(v): i for i, v in enumerate(self.members)}
        mask = np.zeros(g.n, dtype=bool)
        mask[self.members] = True
        loc = np.full(g.n, -1, dtype=np.int64)
        loc[self.members] = np.arange(s)
        flat = g.adj[grouped_ranges(g.indptr[self.members], g.indptr[self.members + 1])]
        keep = mask[flat]
        degs = g.indptr[self.members + 1] - g.indptr[self.members]
        bounds = np.zeros(s + 1, dtype=np.int64)
        np.cumsum(degs, out=bounds[1:])
        if len(flat):
            starts = np.minimum(bounds[:-1], len(flat) - 1)  # reduceat bound for empty rows
            internal_deg = np.add.reduceat(keep, starts)
            internal_deg = np.where(degs > 0, internal_deg, 0)
        else:
            internal_deg = np.zeros(s, np.int64)
        self.indptr = np.zeros(s + 1, dtype=np.int64)
        np.cumsum(internal_deg, out=self.indptr[1:])
        self.indices = loc[flat[keep]]
        self._dist_rows: dict[int, np.ndarray] = {}
        self._dist_matrix: Optional[np.ndarray] = None
        self._connected: Optional[bool] = None

    _ALL_PAIRS_SIZE_LIMIT = 2048
    _ALL_PAIRS_QUERY_TRIGGER = 8

    def _all_pairs(self) -> np.ndarray:
        """Bit-parallel multi-source BFS: dist matrix in O(D) vector sweeps.

        B[v] is the bitset of origins whose flood has reached v; one sweep
        ORs each node's neighbors' bitsets into it.
        """
        s = self.size
        words = (s + 63) // 64
        rows = np.arange(s)
        B = np.zeros((s, words), dtype=np.uint64)
        B[rows, rows // 64] = np.uint64(1) << (rows % 64).astype(np.uint64)
        dist = np.full((s, s), -1, dtype=np.int16)
        dist[rows, rows] = 0
        nonempty = np.flatnonzero(np.diff(self.indptr) > 0)
        seg_starts = self.indptr[nonempty]
        d = 0
        while d <= s:
            d += 1
            gathered = B[self.indices]
            nb = np.zeros_like(B)
            if len(seg_starts):
                nb[nonempty] = np.bitwise_or.reduceat(gathered, seg_starts, axis=0)
            diff = nb & ~B
            if not diff.any():
                break
            bools = np.unpackbits(diff.view(np.uint8), axis=1, bitorder="little")[:, :s]
            ii, jj = np.nonzero(bools)
            dist[ii, jj] = d  # origin jj reached node ii at distance d
            B |= nb
        return dist

    def _dist_row(self, origin_local: int) -> np.ndarray:
        if self._dist_matrix is not None:
            return self._dist_matrix[origin_local]
        row = self._dist_rows.get(origin_local)
        if row is not None:
            return row
        if (
            1 < self.size <= self._ALL_PAIRS_SIZE_LIMIT
            and len(self._dist_rows) >= self._ALL_PAIRS_QUERY_TRIGGER
        ):
            self._dist_matrix = self._all_pairs()
            self._dist_rows.clear()
            return self._dist_matrix[origin_local]
        dist = np.full(self.size, -1, dtype=np.int64)
        dist[origin_local] = 0
        frontier = np.array([origin_local], dtype=np.int64)
        d = 0
        while len(frontier):
            d += 1
            flat = self.indices[grouped_ranges(self.indptr[frontier], self.indptr[frontier + 1])]
            cand = flat[dist[flat] < 0]
            if len(cand) == 0:
                break
            cand = np.unique(cand)
            dist[cand] = d
            frontier = cand
        self._dist_rows[origin_local] = dist
        return dist

    def connected(self) -> bool:
        if self._connected is None:
            self._connected = self.size <= 1 or bool((self._dist_row(0) >= 0).all())
        return self._connected

    def ecc(self, origin: int) -> int:
        """Eccentricity of origin within the induced subgraph."""
        if self.size <= 1:
            return 0
        row = self._dist_row(self.local[origin])
        if (row < 0).any():
            raise DisconnectedScope()
        return int(row.max())

    def bfs_tree(self, origin: int) -> tuple[np.ndarray, np.ndarray]:
        """(dist, parent) in local indices; parent = min-id informed neighbor."""
        dist = self._dist_row(self.local[origin])
        parent = np.full(self.size, -1, dtype=np.int64)
        for w in range(self.size):
            if dist[w] <= 0:
                continue
            nbrs = self.indices[self.indptr[w]:self.indptr[w + 1]]
            ok = nbrs[dist[nbrs] == dist[w] - 1]
            parent[w] = ok.min()
        return dist, parent


class DisconnectedScope(Exception):
    pass


class SimulationFailure(Exception):
    """Raised internally to unwind the round loop on a reported failure."""


class NodeProgram:
    """Per-node behavior: react to inbox/wakeups, emit at most one message
    per incident edge per round."""

    halted = False

    def on_init(self, ctx: "NodeContext") -> None:  # pragma: no cover - interface
        pass

    def on_round(self, ctx: "NodeContext") -> None:  # pragma: no cover - interface
        pass


class NodeContext:
    __slots__ = ("sim", "node", "inbox")

    def __init__(self, sim: "Simulator", node: int, inbox: list):
        self.sim = sim
        self.node = node
        self.inbox = inbox  # [(sender, Message)] sorted by sender

    @property
    def now(self) -> int:
        return self.sim.round

    def neighbors(self) -> np.ndarray:
        return self.sim.g.neighbors(self.node)

    def send(self, dst: int, msg: Message) -> None:
        self.sim.send(self.node, dst, msg)

    def wake(self, rnd: Optional[int] = None) -> None:
        self.sim.wake(self.node, rnd)

    def halt(self) -> None:
        self.sim.halt_node(self.node)

    def stream(self, tag: int) -> rng.Stream:
        return self.sim.stream(self.node, tag)

    def set_gauge(self, key: str, words: int) -> None:
        self.sim.set_gauge(self.node, key, words)


class Simulator:
    """One run over one graph: programs, services, and exact accounting."""

    def __init__(
        self,
        g: Graph,
        seed: int,
        budgets: Optional[Budgets] = None,
        strict: bool = False,
        transcript: Optional[list] = None,
    ):
        self.g = g
        self.seed = seed
        self.budgets = budgets or Budgets.default_for(g.n)
        if self.budgets.max_rounds is None:
            self.budgets.max_rounds = Budgets.default_for(g.n).max_rounds
        self.strict = strict or transcript is not None
        self.transcript = transcript
        self.round = 0
        self.rounds_observed = 0
        self.steps = 0
        self.messages = 0
        self.congest_checks = 0
        self.congest_violations = 0
        self._bandwidth = bandwidth_bits(g.n)
        self._programs: dict[int, NodeProgram] = {}
        self._halted: set[int] = set()
        self._deliveries: dict[int, list[tuple[int, int, Message]]] = {}
        self._wakeups: dict[int, set[int]] = {}
        self._events: dict[int, list[tuple[tuple, Callable[[], None]]]] = {}
        self._event_seq = 0
        self._slots: dict[int, set[tuple[int, int]]] = {}
        self._mem_cur = np.zeros(g.n, dtype=np.int64)
        self._mem_peak = np.zeros(g.n, dtype=np.int64)
        self._gauges: dict[tuple[int, str], int] = {}
        self._phases: list[tuple[str, int]] = []
        self._failure: Optional[tuple[FailureReason, str]] = None
        self._success_flag = True

    # -- randomness -------------------------------------------------------

    def stream(self, node: int, tag: int) -> rng.Stream:
        return rng.Stream(self.seed, node, tag)

    # -- memory accounting --------------------------------------------------

    def set_gauge(self, node: int, key: str, words: int) -> None:
        old = self._gauges.get((node, key), 0)
        if words == old:
            return
        self._gauges[(node, key)] = words
        cur = self._mem_cur[node] + (words - old)
        self._mem_cur[node] = cur
        if cur > self._mem_peak[node]:
            self._mem_peak[node] = cur

    def set_gauge_array(self, nodes: np.ndarray, key: str, words: np.ndarray) -> None:
        for v, w in zip(nodes, words):
            self.set_gauge(int(v), key, int(w))

    def peak_memory(self) -> dict[int, int]:
        return {int(v): int(self._mem_peak[v]) for v in range(self.g.n)}

    # -- phases -------------------------------------------------------------

    def begin_phase(self, label: str) -> None:
        self._phases.append((label, self.rounds_observed))

    def phase_rounds(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for i, (label, start) in enumerate(self._phases):
            end = self._phases[i + 1][1] if i + 1 < len(self._phases) else self.rounds_observed
            out[label] = out.get(label, 0) + (end - start)
        return out

    # -- failure / success ----------------------------------------------------

    def fail(self, reason: FailureReason, detail: str = "") -> None:
        if self._failure is None:
            self._failure = (reason, detail)
        raise SimulationFailure()

    # -- message plumbing -----------------------------------------------------

    def _check_slot(self, rnd: int, src: int, dst: int) -> None:
        self.congest_checks += 1
        slots = self._slots.setdefault(rnd, set())
        key = (src, dst)
        if key in slots:
            self.congest_violations += 1
            raise RuntimeError(f"edge ({src}->{dst}) carries two messages in round {rnd}")
        slots.add(key)

    def _check_size(self, msg: Message) -> None:
        self.congest_checks += 1
        if len(msg.payload) > 4 or any(not (0 <= x <= self.g.n) for x in msg.payload):
            self.congest_violations += 1
            raise RuntimeError(f"malformed payload {msg.payload}")
        if msg.size_bits(self.g.n) > self._bandwidth:
            self.congest_violations += 1
            raise RuntimeError(f"message exceeds bandwidth: {msg}")

    def _transcribe(self, rnd: int, src: int, dst: int, msg: Message) -> None:
        if self.transcript is not None:
            p = list(msg.payload) + ["-"] * (4 - len(msg.payload))
            self.transcript.append(
                f"{rnd} {src} {dst} {msg.kind.name} {p[0]} {p[1]} {p[2]} {p[3]}"
            )

    def send(self, src: int, dst: int, msg: Message) -> None:
        """Point-to-point send during the current round; arrives this round,
        readable next round."""
        if not self.g.has_edge(src, dst):
            raise RuntimeError(f"{src} is not adjacent to {dst}")
        self._check_size(msg)
        self._check_slot(self.round, src, dst)
        self._transcribe(self.round, src, dst, msg)
        self.messages += 1
        self.rounds_observed = max(self.rounds_observed, self.round)
        self._deliveries.setdefault(self.round + 1, []).append((dst, src, msg))

    def wake(self, node: int, rnd: Optional[int] = None) -> None:
        rnd = self.round + 1 if rnd is None else rnd
        if rnd <= self.round:
            raise RuntimeError("wakeups must be in the future")
        self._wakeups.setdefault(rnd, set()).add(node)

    def at_round(self, rnd: int, callback: Callable[[], None], key: tuple = ()) -> None:
        """Run callback when round `rnd` is processed (before node programs).

        Callbacks of one round run in registration order.
        """
        self._event_seq += 1
        self._events.setdefault(rnd, []).append(((self._event_seq,), callback))

    def halt_node(self, node: int) -> None:
        self._halted.add(node)

    # -- scoped services ------------------------------------------------------

    def make_scope(self, members: Iterable[int]) -> ScopeInfo:
        return ScopeInfo(self.g, members)

    def _account_span(self, last_traffic_round: int) -> None:
        self.rounds_observed = max(self.rounds_observed, last_traffic_round)

    def _materialize_down(self, scope: ScopeInfo, origin: int, msg: Message, r0: int) -> None:
        dist, parent = scope.bfs_tree(origin)
        for w in range(scope.size):
            if dist[w] <= 0:
                continue
            src = int(scope.members[parent[w]])
            dst = int(scope.members[w])
            rnd = r0 + int(dist[w]) - 1
            self._check_slot(rnd, src, dst)
            self._transcribe(rnd, src, dst, msg)

    def _materialize_up(self, scope: ScopeInfo, origin: int, msg: Message, r0: int, ecc: int) -> None:
        dist, parent = scope.bfs_tree(origin)
        for w in range(scope.size):
            if dist[w] <= 0:
                continue
            src = int(scope.members[w])
            dst = int(scope.members[parent[w]])
            rnd = r0 + ecc - int(dist[w])
            self._check_slot(rnd, src, dst)
            self._transcribe(rnd, src, dst, msg)

    def broadcast(
        self,
        scope: ScopeInfo,
        origin: int,
        msg: Message,
        on_complete: Optional[Callable[[], None]] = None,
        deliver: bool = False,
    ) -> int:
        """Flood `msg` from origin to every scope member; each member
        receives it exactly once (duplicate suppression).  Consumes
        ecc(origin) rounds and |scope|-1 messages.  Returns the first round
        at which members may act on the payload."""
        self._check_size(msg)
        if not scope.connected():
            self.fail(FailureReason.PARTITION_DISCONNECTED,
                      f"broadcast scope of {scope.size} is disconnected")
        r0 = self.round
        if scope.size <= 1:
            act = r0 + 1
            if on_complete is not None:
                self.at_round(act, on_complete, key=(origin,))
            return act
        ecc = scope.ecc(origin)
        self.messages += scope.size - 1
        self._account_span(r0 + ecc - 1)
        if self.strict:
            self._materialize_down(scope, origin, msg, r0)
        act = r0 + ecc
        if on_complete is not None:
            self.at_round(act, on_complete, key=(origin,))
        if deliver:
            dist, parent = scope.bfs_tree(origin)
            for w in range(scope.size):
                if dist[w] <= 0:
                    continue
                self._deliveries.setdefault(r0 + int(dist[w]), []).append(
                    (int(scope.members[w]), int(scope.members[parent[w]]), msg)
                )
        return act

    # the broadcast op is a duplicate-suppressed flood; expose both names
    flood_broadcast = broadcast

    def charge_memory(self, node: int, key: str, words: int) -> None:
        """Set one named component of a node's charged working memory."""
        self.set_gauge(node, key, words)

    def convergecast_count(
        self,
        scope: ScopeInfo,
        root: Optional[int] = None,
        on_complete: Optional[Callable[[int], None]] = None,
    ) -> tuple[int, int]:
        """Count scope members at the root (leaf-to-root aggregation), then
        flood the size back down.  Consumes at most 2*ecc(root) rounds and
        2*(|scope|-1) messages.  Returns (size, act_round)."""
        if not scope.connected():
            self.fail(FailureReason.PARTITION_DISCONNECTED,
                      f"convergecast scope of {scope.size} is disconnected")
        root = int(scope.members[0]) if root is None else root
        r0 = self.round
        size = scope.size
        if size <= 1:
            act = r0 + 1
        else:
            ecc = scope.ecc(root)
            self.messages += 2 * (size - 1)
            self._account_span(r0 + 2 * ecc - 1)
            if self.strict:
                up = Message(MessageKind.SIZE_REPORT, (size,))
                self._materialize_up(scope, root, up, r0, ecc)
                self._materialize_down(scope, root, up, r0 + ecc)
            act = r0 + 2 * ecc
        if on_complete is not None:
            self.at_round(act, lambda: on_complete(size), key=(root,))
        return size, act

    def charge_exchange(self, count: int, rounds: int, sample: Message,
                        at: Optional[int] = None) -> int:
        """Account an aggregate exchange of `count` homogeneous messages
        spanning `rounds` rounds starting at `at` (default: now).  Returns
        the first round after the exchange."""
        self._check_size(sample)
        r0 = self.round if at is None else at
        self.messages += count
        if count:
            self._account_span(r0 + rounds - 1)
        return r0 + rounds

    def count_step(self) -> None:
        self.steps += 1
        if self.budgets.max_steps is not None and self.steps > self.budgets.max_steps:
            self.fail(FailureReason.STEP_BUDGET_EXCEEDED, "global step budget")

    # -- main loop -------------------------------------------------------------

    def install(self, node: int, program: NodeProgram) -> None:
        self._programs[node] = program

    def run(self) -> SimulationReport:
        try:
            for node in sorted(self._programs):
                self._programs[node].on_init(NodeContext(self, node, []))
            while True:
                pending = []
                if self._deliveries:
                    pending.append(min(self._deliveries))
                if self._wakeups:
                    pending.append(min(self._wakeups))
                if self._events:
                    pending.append(min(self._events))
                if not pending:
                    break
                r = min(pending)
                if r > self.budgets.max_rounds:
                    self.fail(FailureReason.STEP_BUDGET_EXCEEDED,
                              f"max_rounds {self.budgets.max_rounds} exhausted")
                self.round = r
                for stale in [k for k in self._slots if k < r]:
                    del self._slots[stale]
                for _, cb in sorted(self._events.pop(r, []), key=lambda e: e[0]):
                    cb()
                inboxes: dict[int, list[tuple[int, Message]]] = {}
                for dst, src, msg in self._deliveries.pop(r, []):
                    inboxes.setdefault(dst, []).append((src, msg))
                active = set(inboxes) | self._wakeups.pop(r, set())
                for node in sorted(active):
                    if node in self._halted:
                        continue
                    prog = self._programs.get(node)
                    if prog is None:
                        continue
                    inbox = sorted(inboxes.get(node, []), key=lambda t: t[0])
                    prog.on_round(NodeContext(self, node, inbox))
        except SimulationFailure:
            pass
        reason, detail = self._failure if self._failure else (None, "")
        return SimulationReport(
            rounds=self.rounds_observed,
            steps=self.steps,
            messages=self.messages,
            peak_memory_words=self.peak_memory(),
            success=self._failure is None and self._success_flag,
            failure_reason=reason,
            failure_detail=detail,
            phase_rounds=self.phase_rounds(),
            congest_checks=self.congest_checks,
            congest_violations=self.congest_violations,
        )


def run(
    g: Graph,
    program_factory: Callable[[int], NodeProgram],
    seed: int,
    budgets: Optional[Budgets] = None,
    strict: bool = False,
    transcript: Optional[list] = None,
) -> SimulationReport:
    """Execute one program per node until quiescence, failure, or budget."""
    sim = Simulator(g, seed, budgets, strict=strict, transcript=transcript)
    for v in range(g.n):
        sim.install(v, program_factory(v))
    return sim.run()
