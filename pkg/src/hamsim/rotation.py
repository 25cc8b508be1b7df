"""Rotation-based Hamiltonian cycle construction.

One instance grows a path over a member scope.  A single head acts at a
time: it draws a random not-yet-used incident edge and sends a progress
message over it.  A fresh receiver extends the path and becomes the new
head; an on-path receiver triggers a rotation, announced to the whole
scope by one flood so every member can renumber locally.  The cycle closes
when the path covers the scope and the head draws the edge to the tail.

The per-member path indices live in shared arrays (`order`, `idx`): each
node's view of its own index is a read of `idx[node]`, and one rotation is
a single segment reversal instead of scope-many callback invocations.

``sequential_rotation_solve`` is an independent, centralized implementation
of the same rule, used as the root-side solver and as a test oracle.
"""

from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np

from . import rng
from .graph import Graph
from .runtime import (
    FailureReason,
    Message,
    MessageKind,
    NodeContext,
    NodeProgram,
    ScopeInfo,
    Simulator,
    dra_step_budget,
)

RUNNING, DONE, FAILED = 0, 1, 2


class PathCore:
    """Shared engine and choreography for one rotation instance."""

    def __init__(
        self,
        sim: Simulator,
        scope: ScopeInfo,
        label: str = "cyc",
        rng_tag: int = rng.TAG_DRA,
        steps_mult: float = 1.0,
        on_done: Optional[Callable[["PathCore"], None]] = None,
        step_hook: Optional[Callable[["PathCore"], None]] = None,
        on_census: Optional[Callable[[], None]] = None,
    ):
        self.sim = sim
        self.scope = scope
        self.label = label
        self.rng_tag = rng_tag
        self.size = scope.size
        self.budget = dra_step_budget(self.size, steps_mult)
        self.on_done = on_done
        self.step_hook = step_hook
        self.on_census = on_census
        self.status = RUNNING
        self.steps = 0
        self.pos = 0
        self.head = -1
        self.closing_edge: Optional[tuple[int, int]] = None
        g = sim.g
        self.order = np.zeros(self.size + 1, dtype=np.int64)
        self.idx = np.zeros(g.n, dtype=np.int64)
        mask = np.zeros(g.n, dtype=bool)
        mask[scope.members] = True
        self.unused: dict[int, list[int]] = {}
        self.posmap: dict[int, dict[int, int]] = {}
        for v in scope.members:
            v = int(v)
            nb = g.neighbors(v)
            internal = [int(w) for w in nb[mask[nb]]]
            self.unused[v] = internal
            self.posmap[v] = {w: i for i, w in enumerate(internal)}
            sim.set_gauge(v, f"{label}:unused", len(internal))
            sim.set_gauge(v, f"{label}:state", 4)
        self._streams: dict[int, rng.Stream] = {}

    # -- protocol ----------------------------------------------------------

    def start(self) -> None:
        """Census (size + leader) then hand the token to the initial head."""
        if self.size < 3:
            self.sim.fail(
                FailureReason.PARTITION_DISCONNECTED,
                f"scope of size {self.size} cannot carry a cycle",
            )
        leader = int(self.scope.members[0])
        self.sim.convergecast_count(self.scope, leader, on_complete=self._census_done)

    def _census_done(self, size: int) -> None:
        if self.on_census is not None:
            self.on_census()
        head = int(self.scope.members[0])
        self.pos = 1
        self.order[1] = head
        self.idx[head] = 1
        self.head = head
        self._act()

    def _stream(self, node: int) -> rng.Stream:
        s = self._streams.get(node)
        if s is None:
            s = self.sim.stream(node, self.rng_tag)
            self._streams[node] = s
        return s

    def _remove(self, a: int, b: int) -> None:
        pm = self.posmap[a]
        if b not in pm:
            return
        lst = self.unused[a]
        i = pm.pop(b)
        last = lst.pop()
        if last != b:
            lst[i] = last
            pm[last] = i

    def _act(self) -> None:
        """The head draws one unused edge and sends progress over it."""
        head = self.head
        lst = self.unused[head]
        if self.steps >= self.budget:
            self.sim.fail(
                FailureReason.STEP_BUDGET_EXCEEDED,
                f"{self.label}: {self.steps} steps on scope of {self.size}",
            )
        if not lst:
            self.sim.fail(
                FailureReason.UNUSED_EXHAUSTED,
                f"{self.label}: head {head} at pos {self.pos}/{self.size}",
            )
        u = lst[self._stream(head).randrange(len(lst))]
        self._remove(head, u)
        self.steps += 1
        self.sim.count_step()
        self.sim.send(head, u, Message(MessageKind.PROGRESS, (self.pos,)))

    def on_progress(self, node: int, sender: int, pos: int) -> None:
        if self.status != RUNNING:
            return
        if pos == self.size and self.idx[node] == 1:
            self.closing_edge = (sender, node)
            self.sim.broadcast(
                self.scope, node, Message(MessageKind.CONTROL, (1,)),
                on_complete=self._finish,
            )
            return
        self._remove(node, sender)
        if self.idx[node] == 0:
            self.pos += 1
            self.order[self.pos] = node
            self.idx[node] = self.pos
            self.head = node
            if self.step_hook is not None:
                self.step_hook(self)
            self._act()
        else:
            h, j = self.pos, int(self.idx[node])
            self.sim.broadcast(
                self.scope, node, Message(MessageKind.ROTATION, (h, j)),
                on_complete=lambda: self._rotation_done(h, j),
            )

    def _rotation_done(self, h: int, j: int) -> None:
        seg = self.order[j + 1 : h + 1].copy()
        self.order[j + 1 : h + 1] = seg[::-1]
        self.idx[seg] = h + j + 1 - self.idx[seg]
        self.head = int(self.order[h])
        if self.step_hook is not None:
            self.step_hook(self)
        self._act()

    def _finish(self) -> None:
        self.status = DONE
        if self.on_done is not None:
            self.on_done(self)

    # -- views --------------------------------------------------------------

    def snapshot(self) -> list[int]:
        """Current path as an ordered node list (test/diagnostic view)."""
        return [int(v) for v in self.order[1 : self.pos + 1]]

    def cycle_order(self) -> list[int]:
        if self.status != DONE:
            raise RuntimeError("no cycle yet")
        return [int(v) for v in self.order[1 : self.size + 1]]

    def index_of(self, node: int) -> int:
        return int(self.idx[node])


class DraProgram(NodeProgram):
    """Relays progress messages of one rotation instance to its core."""

    def __init__(self, node: int, core: PathCore):
        self.node = node
        self.core = core

    def on_round(self, ctx: NodeContext) -> None:
        for sender, msg in ctx.inbox:
            if msg.kind == MessageKind.PROGRESS:
                self.core.on_progress(self.node, sender, msg.payload[0])


def dra_programs(
    sim: Simulator,
    members,
    label: str = "cyc",
    rng_tag: int = rng.TAG_DRA,
    steps_mult: float = 1.0,
    on_done: Optional[Callable[[PathCore], None]] = None,
    step_hook=None,
    on_census=None,
) -> PathCore:
    """Install one rotation instance over `members`; returns its core.

    The caller starts it with ``sim.at_round(r, core.start)``.
    """
    scope = sim.make_scope(members)
    core = PathCore(sim, scope, label, rng_tag, steps_mult, on_done, step_hook,
                    on_census)
    for v in scope.members:
        sim.install(int(v), DraProgram(int(v), core))
    return core


def run_dra(
    g: Graph,
    seed: int,
    members=None,
    budgets=None,
    strict: bool = False,
    transcript: Optional[list] = None,
    steps_mult: float = 1.0,
    step_hook=None,
):
    """Standalone rotation run over `members` (default: the whole graph).

    Returns (report, cycle order or None).
    """
    from .runtime import Budgets

    sim = Simulator(g, seed, budgets or Budgets.default_for(g.n),
                    strict=strict, transcript=transcript)
    core = dra_programs(sim, members if members is not None else range(g.n),
                        steps_mult=steps_mult, step_hook=step_hook,
                        on_census=lambda: sim.begin_phase("build"))
    sim.begin_phase("census")
    sim.at_round(1, core.start)
    report = sim.run()
    if report.success and core.status != DONE:
        report.success = False
        report.failure_reason = FailureReason.STEP_BUDGET_EXCEEDED
        report.failure_detail = "quiescent without completing"
    order = core.cycle_order() if core.status == DONE else None
    report.extras["cycle"] = order
    return report, order


def sequential_rotation_solve(
    g: Graph,
    stream: rng.Stream | None = None,
    draw: Optional[Callable[[int, int], int]] = None,
    steps_mult: float = 1.0,
) -> Optional[list[int]]:
    """Centralized rotation solver; same rule, no messages.

    Draws come from `stream` (or a ``draw(head, k) -> index`` hook, used by
    the lockstep-equivalence tests).  Returns the cycle as an ordered node
    list, or None on unused-edge exhaustion / step budget.
    """
    n = g.n
    if n < 3:
        return None
    if draw is None:
        if stream is None:
            raise ValueError("need a stream or a draw function")
        draw = lambda _head, k: stream.randrange(k)
    unused = [[int(w) for w in g.neighbors(v)] for v in range(n)]
    posmap = [{w: i for i, w in enumerate(row)} for row in unused]

    def remove(a: int, b: int) -> None:
        pm = posmap[a]
        if b not in pm:
            return
        lst = unused[a]
        i = pm.pop(b)
        last = lst.pop()
        if last != b:
            lst[i] = last
            pm[last] = i

    order = np.zeros(n + 1, dtype=np.int64)
    idx = np.zeros(n, dtype=np.int64)
    head = 0
    order[1] = head
    idx[head] = 1
    pos = 1
    budget = dra_step_budget(n, steps_mult)
    for _ in range(budget):
        lst = unused[head]
        if not lst:
            return None
        u = lst[draw(head, len(lst))]
        remove(head, u)
        j = int(idx[u])
        if j == 1 and pos == n:
            return [int(v) for v in order[1 : n + 1]]
        remove(u, head)
        if j == 0:
            pos += 1
            order[pos] = u
            idx[u] = pos
            head = u
        else:
            h = pos
            seg = order[j + 1 : h + 1].copy()
            order[j + 1 : h + 1] = seg[::-1]
            idx[seg] = h + j + 1 - idx[seg]
            head = int(order[h])
    return None
