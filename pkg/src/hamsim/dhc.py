"""Two-phase distributed Hamiltonian-cycle builders.

Both algorithms share phase 1: every node draws a uniform color, the color
classes each build a cycle over their induced subgraph with the rotation
protocol, all classes in parallel.

``run_dhc1`` (square-root many classes) then contracts each class cycle to
a two-terminal gadget (one chosen cycle edge) and runs the rotation
protocol once more over the gadget graph; stitching the gadget cycle back
through the class cycles yields the full cycle.

``run_dhc2`` (n^(1-delta) classes) instead merges cycles pairwise over
ceil(log2(num_colors)) levels.  A pair is spliced through a bridge: one
cycle edge per side whose endpoints are cross-connected by two graph
edges; the lexicographically smallest bridge is selected per pair and both
cycles renumber via closed-form index rules carried by two floods.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import rng
from .graph import Graph
from .rotation import PathCore, dra_programs
from .runtime import (
    Budgets,
    FailureReason,
    Message,
    MessageKind,
    NodeContext,
    NodeProgram,
    ScopeInfo,
    Simulator,
    dra_step_budget,
    grouped_ranges,
)
from .verify import HcCertificate


def num_colors_sqrt(n: int) -> int:
    return math.ceil(math.sqrt(n))


def num_colors_delta(n: int, delta: float) -> int:
    return math.ceil(n ** (1.0 - delta))


def assign_colors(seed: int, n: int, num_colors: int) -> np.ndarray:
    """Per-node uniform color in 1..num_colors from each node's own stream."""
    if not 1 <= num_colors <= n:
        raise ValueError("num_colors must be in [1, n]")
    u = rng.node_uniform_array(seed, rng.TAG_COLOR, np.arange(n))
    return (u * num_colors).astype(np.int64) + 1


# ---------------------------------------------------------------------------
# shared phase 1


class _ClassRelay(NodeProgram):
    """Placeholder for nodes whose class already finished (or never acts)."""

    def on_round(self, ctx: NodeContext) -> None:
        pass


def _phase1(
    sim: Simulator,
    g: Graph,
    num_colors: int,
    steps_mult: float,
    on_all_done: Callable[[list[PathCore], np.ndarray], None],
    step_hook=None,
) -> None:
    """Color, census, and build one cycle per class; barrier on completion."""
    colors = assign_colors(sim.seed, g.n, num_colors)
    sim.set_gauge_array(np.arange(g.n), "color", np.full(g.n, 2, np.int64))
    class_members = [np.flatnonzero(colors == c) for c in range(1, num_colors + 1)]
    bad = [c + 1 for c, mem in enumerate(class_members) if len(mem) < 3]
    cores: list[PathCore] = []
    done = {"count": 0}

    def one_done(_core: PathCore) -> None:
        done["count"] += 1
        if done["count"] == len(cores):
            on_all_done(cores, colors)

    def exchange_colors() -> None:
        # every node tells its neighbors its color: one round, both directions
        sim.charge_exchange(2 * g.m, 1, Message(MessageKind.CONTROL, (num_colors,)))

    def kickoff() -> None:
        if bad:
            sim.fail(
                FailureReason.PARTITION_DISCONNECTED,
                f"{len(bad)} color classes smaller than 3 (e.g. color {bad[0]})",
            )
        for mem in class_members:
            cores.append(
                dra_programs(sim, mem, label="subcyc", rng_tag=rng.TAG_DRA,
                             steps_mult=steps_mult, on_done=one_done,
                             step_hook=step_hook)
            )
        for core in cores:
            core.start()

    sim.at_round(1, exchange_colors)
    sim.at_round(2, kickoff)


# ---------------------------------------------------------------------------
# DHC1 phase 2: gadget graph over chosen cycle edges


class GadgetCore:
    """Rotation over two-terminal gadgets (one contracted cycle edge each).

    A gadget is traversed entry-terminal -> exit-terminal through its whole
    class cycle.  Path edges connect the head gadget's exit terminal to the
    target gadget's entry terminal; reversing a path segment flips the
    entry/exit roles of every gadget inside it.  A draw that lands on an
    on-path gadget's entry terminal cannot splice and is rejected (the edge
    is still consumed).
    """

    def __init__(
        self,
        sim: Simulator,
        entry_term: np.ndarray,   # initial entry terminal per gadget
        exit_term: np.ndarray,    # initial exit terminal per gadget
        steps_mult: float,
        on_done: Callable[["GadgetCore"], None],
    ):
        self.sim = sim
        self.k = len(entry_term)
        self.entry = entry_term.astype(np.int64).copy()
        self.exit = exit_term.astype(np.int64).copy()
        self.on_done = on_done
        self.status = 0  # running
        self.steps = 0
        self.budget = dra_step_budget(self.k, steps_mult)
        terminals = np.concatenate([self.entry, self.exit])
        self.scope = sim.make_scope(terminals)
        self.gadget_of = {int(t): gid for gid in range(self.k)
                          for t in (self.entry[gid], self.exit[gid])}
        self.order = np.zeros(self.k + 1, dtype=np.int64)
        self.gidx = np.zeros(self.k, dtype=np.int64)
        self.pos = 0
        self.head = -1
        self._streams: dict[int, rng.Stream] = {}
        term_set = set(self.gadget_of)
        self.unused: dict[int, list[int]] = {}
        self.posmap: dict[int, dict[int, int]] = {}
        announce = 0
        for t in sorted(term_set):
            own = self.gadget_of[t]
            row = [int(w) for w in sim.g.neighbors(t)
                   if int(w) in term_set and self.gadget_of[int(w)] != own]
            self.unused[t] = row
            self.posmap[t] = {w: i for i, w in enumerate(row)}
            announce += sim.g.degree(t)
            sim.set_gauge(t, "hyp:unused", len(row))
            sim.set_gauge(t, "hyp:state", 4)
        # terminals announce themselves to all graph neighbors: one round
        sim.charge_exchange(announce, 1, Message(MessageKind.CONTROL, (1, 1)))

    def start(self) -> None:
        if not self.scope.connected():
            self.sim.fail(
                FailureReason.HYPERNODE_GRAPH_DISCONNECTED,
                f"gadget graph over {self.k} cycles is not connected",
            )
        self.sim.convergecast_count(
            self.scope, int(self.scope.members[0]), on_complete=self._census_done
        )

    def _census_done(self, _size: int) -> None:
        self.pos = 1
        self.order[1] = 0   # gadget of color 1 starts as the whole path
        self.gidx[0] = 1
        self.head = 0
        self._act()

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

    def _stream(self, node: int) -> rng.Stream:
        s = self._streams.get(node)
        if s is None:
            s = self.sim.stream(node, rng.TAG_HYPER)
            self._streams[node] = s
        return s

    def _act(self) -> None:
        x = int(self.exit[self.head])
        lst = self.unused[x]
        if self.steps >= self.budget:
            self.sim.fail(FailureReason.STEP_BUDGET_EXCEEDED,
                          f"hyp: {self.steps} steps over {self.k} gadgets")
        if not lst:
            self.sim.fail(FailureReason.UNUSED_EXHAUSTED,
                          f"hyp: terminal {x} dry at pos {self.pos}/{self.k}")
        y = lst[self._stream(x).randrange(len(lst))]
        self._remove(x, y)
        self.steps += 1
        self.sim.count_step()
        self.sim.send(x, y, Message(MessageKind.PROGRESS, (self.pos,)))

    def on_progress(self, node: int, sender: int, pos: int) -> None:
        if self.status != 0:
            return
        gid = self.gadget_of[node]
        if self.gidx[gid] == 0:
            # fresh gadget: enter at `node`, new head acts from its partner
            self._remove(node, sender)
            if self.entry[gid] != node:
                self.entry[gid], self.exit[gid] = self.exit[gid], self.entry[gid]
            self.pos += 1
            self.order[self.pos] = gid
            self.gidx[gid] = self.pos
            self.head = gid
            self.sim.send(node, int(self.exit[gid]), Message(MessageKind.CONTROL, (0,)))
            return
        if pos == self.k and self.gidx[gid] == 1 and node == int(self.entry[gid]):
            self.closing_edge = (sender, node)
            self.sim.broadcast(self.scope, node, Message(MessageKind.CONTROL, (1,)),
                               on_complete=self._finish)
            return
        self._remove(node, sender)
        if node == int(self.exit[gid]) and self.gidx[gid] < self.pos:
            h, j = self.pos, int(self.gidx[gid])
            self.sim.broadcast(self.scope, node, Message(MessageKind.ROTATION, (h, j)),
                               on_complete=lambda: self._rotation_done(h, j))
        else:
            # entry-side (or head's own) hit: unusable, bounce back
            self.sim.send(node, sender, Message(MessageKind.CONTROL, (2,)))

    def on_control(self, node: int, flag: int) -> None:
        if self.status != 0:
            return
        if flag == 0:
            # internal handoff: `node` is the new head's exit terminal
            self._act()
        elif flag == 2:
            self._act()   # rejected draw: head draws again

    def _rotation_done(self, h: int, j: int) -> None:
        seg = self.order[j + 1 : h + 1].copy()
        self.order[j + 1 : h + 1] = seg[::-1]
        self.gidx[seg] = h + j + 1 - self.gidx[seg]
        tmp = self.entry[seg].copy()
        self.entry[seg] = self.exit[seg]
        self.exit[seg] = tmp
        self.head = int(self.order[h])
        self._act()

    def _finish(self) -> None:
        self.status = 1
        self.on_done(self)

    def cycle_gadgets(self) -> list[int]:
        return [int(gcol) for gcol in self.order[1 : self.k + 1]]


class GadgetProgram(NodeProgram):
    def __init__(self, node: int, core: GadgetCore):
        self.node = node
        self.core = core

    def on_round(self, ctx: NodeContext) -> None:
        for sender, msg in ctx.inbox:
            if msg.kind == MessageKind.PROGRESS:
                self.core.on_progress(self.node, sender, msg.payload[0])
            elif msg.kind == MessageKind.CONTROL:
                self.core.on_control(self.node, msg.payload[0])


def build_hypernode_graph(
    g: Graph, terminals: list[tuple[int, int]]
) -> dict[tuple[int, int], list[tuple[int, int]]]:
    """Adjacency of the gadget graph with the usable terminal pairs.

    terminals[i] = (entry_i, exit_i).  Gadgets i and j are adjacent iff any
    graph edge joins a terminal of i with a terminal of j; the value lists
    the concrete (terminal_of_i, terminal_of_j) pairs.
    """
    out: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for i in range(len(terminals)):
        for j in range(i + 1, len(terminals)):
            pairs = [
                (a, b)
                for a in terminals[i]
                for b in terminals[j]
                if g.has_edge(a, b)
            ]
            if pairs:
                out[(i, j)] = pairs
    return out


def run_dhc1(
    g: Graph,
    seed: int,
    steps_mult: float = 1.0,
    budgets: Optional[Budgets] = None,
    strict: bool = False,
    transcript: Optional[list] = None,
    num_colors: Optional[int] = None,
    step_hook=None,
):
    """Partition into ~sqrt(n) class cycles, then cycle the gadget graph.

    Returns (report, certificate or None).
    """
    k = num_colors if num_colors is not None else num_colors_sqrt(g.n)
    sim = Simulator(g, seed, budgets or Budgets.default_for(g.n),
                    strict=strict, transcript=transcript)
    state: dict = {"cores": None, "gadget": None, "colors": None}
    sim.begin_phase("phase1")

    def phase2_setup(cores: list[PathCore], colors: np.ndarray) -> None:
        state["cores"] = cores
        state["colors"] = colors
        sim.begin_phase("phase2")
        if len(cores) == 1:
            return  # one class: its cycle already covers every node
        entries = np.zeros(len(cores), dtype=np.int64)
        exits = np.zeros(len(cores), dtype=np.int64)
        acts = []
        for gid, core in enumerate(cores):
            leader = int(core.scope.members[0])
            pick = sim.stream(leader, rng.TAG_PICK)
            kidx = pick.randrange(core.size) + 1
            u_i = int(core.order[kidx])                     # chosen node
            v_i = int(core.order[kidx - 1 if kidx > 1 else core.size])  # predecessor
            entries[gid] = u_i
            exits[gid] = v_i
            acts.append(
                sim.broadcast(core.scope, leader, Message(MessageKind.CONTROL, (kidx,)))
            )
        def build_gadget_layer() -> None:
            gadget = GadgetCore(sim, entries, exits, steps_mult, on_done=lambda _c: None)
            state["gadget"] = gadget
            for t in gadget.gadget_of:
                sim.install(t, GadgetProgram(t, gadget))
            sim.at_round(sim.round + 1, gadget.start)
        sim.at_round(max(acts), build_gadget_layer)

    _phase1(sim, g, k, steps_mult, phase2_setup, step_hook=step_hook)
    report = sim.run()

    cert = None
    gadget: Optional[GadgetCore] = state["gadget"]
    if report.success and k == 1 and state["cores"] is not None:
        cert = HcCertificate.from_cycle(state["cores"][0].cycle_order())
    elif report.success and gadget is not None and gadget.status == 1:
        cert = _assemble_dhc1_certificate(g, state["cores"], gadget)
        report.extras["hypcyc"] = {int(gadget.entry[gid]): int(gadget.gidx[gid])
                                   for gid in range(gadget.k)}
    elif report.success:
        report.success = False
        report.failure_reason = FailureReason.STEP_BUDGET_EXCEEDED
        report.failure_detail = "quiescent without completing"
    if state["cores"] is not None:
        report.extras["partition_sizes"] = [c.size for c in state["cores"]]
    report.extras["num_colors"] = k
    return report, cert


def _assemble_dhc1_certificate(
    g: Graph, cores: list[PathCore], gadget: GadgetCore
) -> HcCertificate:
    """Class cycles minus their contracted edge, plus the gadget cycle edges."""
    mates: dict[int, list[int]] = {v: [] for v in range(g.n)}

    def add(a: int, b: int) -> None:
        mates[a].append(b)
        mates[b].append(a)

    for gid, core in enumerate(cores):
        order = core.order[1 : core.size + 1]
        u_i, v_i = int(gadget.entry[gid]), int(gadget.exit[gid])
        skip = frozenset((u_i, v_i))
        for i in range(core.size):
            a, b = int(order[i]), int(order[(i + 1) % core.size])
            if frozenset((a, b)) != skip:
                add(a, b)
    seq = gadget.cycle_gadgets()
    for i in range(len(seq)):
        a = int(gadget.exit[seq[i]])
        b = int(gadget.entry[seq[(i + 1) % len(seq)]])
        add(a, b)
    arr = np.zeros((g.n, 2), dtype=np.int64)
    for v, ms in mates.items():
        if len(ms) != 2:
            raise RuntimeError(f"stitching bug: node {v} has {len(ms)} cycle edges")
        arr[v] = sorted(ms)
    return HcCertificate(g.n, arr)


# ---------------------------------------------------------------------------
# DHC2 phase 2: pairwise merging through bridges


@dataclass(frozen=True)
class Bridge:
    """Two cycle edges spliced by two cross edges.

    edge_a = (v, succ(v)) on the active cycle; edge_b = (w, w2) on the
    partner where w2 is w's successor or predecessor; cross edges (v, w)
    and (succ(v), w2) both exist in the graph.
    """

    v: int
    sv: int
    w: int
    w2: int
    w2_is_succ: bool

    def key(self) -> tuple:
        return (
            min(self.v, self.sv), max(self.v, self.sv),
            min(self.w, self.w2), max(self.w, self.w2),
            self.v, self.w,
        )


def _succ_pred(order: np.ndarray) -> tuple[dict, dict]:
    s = len(order)
    succ = {int(order[i]): int(order[(i + 1) % s]) for i in range(s)}
    pred = {int(order[i]): int(order[(i - 1) % s]) for i in range(s)}
    return succ, pred


def discover_bridges(g: Graph, order_a: np.ndarray, order_b: np.ndarray) -> list[Bridge]:
    """All bridge candidates the verify/verified exchange would surface.

    One candidate per cross edge (v, w) whose confirmed partner-side
    neighbor exists; when both of w's cycle neighbors confirm, the
    successor is reported (the passive node replies once).
    """
    in_b = set(int(x) for x in order_b)
    succ_a, _ = _succ_pred(order_a)
    succ_b, pred_b = _succ_pred(order_b)
    out = []
    for v in (int(x) for x in order_a):
        sv = succ_a[v]
        for w in (int(x) for x in g.neighbors(v)):
            if w not in in_b:
                continue
            ws, wp = succ_b[w], pred_b[w]
            if g.has_edge(sv, ws):
                out.append(Bridge(v, sv, w, ws, True))
            elif g.has_edge(sv, wp):
                out.append(Bridge(v, sv, w, wp, False))
    return out


def _discover_bridges_arrays(
    g: Graph,
    A: np.ndarray,
    b_color: int,
    node_color: np.ndarray,
    succ_of: np.ndarray,
    pred_of: np.ndarray,
):
    """Vectorized candidate surface for one active cycle.

    Returns (n_cross, vv, ww, w2, w2_is_succ) where the last four arrays
    cover only the confirmed cross edges.  Must agree with
    ``discover_bridges`` (the readable reference) on every instance.
    """
    flat = g.adj[grouped_ranges(g.indptr[A], g.indptr[A + 1])]
    degs = g.indptr[A + 1] - g.indptr[A]
    V = np.repeat(A, degs)
    keep = node_color[flat] == b_color
    V, W = V[keep], flat[keep]
    if len(V) == 0:
        return 0, V, W, W, np.zeros(0, dtype=bool)
    SV = succ_of[V]
    WS, WP = succ_of[W], pred_of[W]
    conf_s = g.has_edges(SV, WS)
    conf_p = g.has_edges(SV, WP)
    any_conf = conf_s | conf_p
    vv, ww = V[any_conf], W[any_conf]
    take_succ = conf_s[any_conf]
    w2 = np.where(take_succ, succ_of[ww], pred_of[ww])
    return len(V), vv, ww, w2, take_succ


def renumber_merged(bridge: Bridge, order_a: np.ndarray, order_b: np.ndarray) -> np.ndarray:
    """Closed-form merged order: succ(v) leads, v closes the active block,
    then the partner block from w in the orientation forced by the bridge;
    the wraparound edge is (w2, succ(v))."""
    sa, sb = len(order_a), len(order_b)
    ia = int(np.flatnonzero(order_a == bridge.v)[0]) + 1
    iw = int(np.flatnonzero(order_b == bridge.w)[0]) + 1
    part_a = np.roll(order_a, -(ia % sa))
    if bridge.w2_is_succ:
        rev = order_b[::-1]
        part_b = np.roll(rev, -((sb - iw) % sb))
    else:
        part_b = np.roll(order_b, -(iw - 1))
    return np.concatenate([part_a, part_b])


class _Dhc2State:
    def __init__(self):
        self.cycles: dict[int, np.ndarray] = {}
        self.levels_executed = 0
        self.level_log: list[dict] = []
        self.final_order: Optional[np.ndarray] = None
        self.p1_sizes: list[int] = []


def run_dhc2(
    g: Graph,
    delta: float,
    seed: int,
    steps_mult: float = 1.0,
    budgets: Optional[Budgets] = None,
    strict: bool = False,
    transcript: Optional[list] = None,
    num_colors: Optional[int] = None,
    level_hook: Optional[Callable[[int, dict[int, np.ndarray]], None]] = None,
    step_hook=None,
):
    """Phase-1 class cycles with n^(1-delta) colors, then log-many merge
    levels.  Returns (report, certificate or None)."""
    if not 0.0 < delta <= 1.0:
        raise ValueError("delta must be in (0, 1]")
    k0 = num_colors if num_colors is not None else num_colors_delta(g.n, delta)
    sim = Simulator(g, seed, budgets or Budgets.default_for(g.n),
                    strict=strict, transcript=transcript)
    st = _Dhc2State()
    total_levels = max(1, math.ceil(math.log2(k0))) if k0 > 1 else 0
    node_color = np.zeros(g.n, dtype=np.int64)
    node_index = np.zeros(g.n, dtype=np.int64)
    succ_of = np.zeros(g.n, dtype=np.int64)
    pred_of = np.zeros(g.n, dtype=np.int64)

    sim.begin_phase("phase1")

    def set_cycle_arrays(color: int, order: np.ndarray) -> None:
        st.cycles[color] = order
        node_color[order] = color
        node_index[order] = np.arange(1, len(order) + 1)
        succ_of[order] = np.roll(order, -1)
        pred_of[order] = np.roll(order, 1)

    def phase2_start(cores: list[PathCore], colors: np.ndarray) -> None:
        sim.begin_phase("phase2")
        st.p1_sizes = [core.size for core in cores]
        for idx, core in enumerate(cores):
            set_cycle_arrays(idx + 1, np.array(core.cycle_order(), dtype=np.int64))
        run_level(1)

    def merge_pair(a: int, b: int, level: int) -> int:
        """Merge cycles a and b; returns rounds consumed by this pair."""
        A, B = st.cycles[a], st.cycles[b]
        sa, sb = len(A), len(B)
        scope_a = sim.make_scope(A)
        # --- discovery: verify / ask / answer / verified (4 rounds)
        flat = g.adj[grouped_ranges(g.indptr[A], g.indptr[A + 1])]
        degs = g.indptr[A + 1] - g.indptr[A]
        V = np.repeat(A, degs)
        keep = node_color[flat] == b
        V, W = V[keep], flat[keep]
        n_cross = len(V)
        if n_cross:
            SV = succ_of[V]
            WS, WP = succ_of[W], pred_of[W]
            conf_s = g.has_edges(SV, WS)
            conf_p = g.has_edges(SV, WP)
            any_conf = conf_s | conf_p
        else:
            any_conf = np.zeros(0, dtype=bool)
        n_cand = int(any_conf.sum())
        sim.charge_exchange(5 * n_cross + n_cand, 4, Message(MessageKind.VERIFY, (1,)))
        if n_cand == 0:
            sim.fail(FailureReason.NO_BRIDGE_FOUND,
                     f"level {level}: no bridge between cycles {a} and {b}")
        vv, ww = V[any_conf], W[any_conf]
        svv = succ_of[vv]
        w2 = np.where(conf_s[any_conf], succ_of[ww], pred_of[ww])
        keys = np.stack([
            np.minimum(vv, svv), np.maximum(vv, svv),
            np.minimum(ww, w2), np.maximum(ww, w2),
            vv, ww,
        ])
        best = int(np.lexsort(keys[::-1])[0])
        bridge = Bridge(int(vv[best]), int(svv[best]), int(ww[best]), int(w2[best]),
                        bool(conf_s[any_conf][best]))
        # --- selection: min-candidate convergecast inside the active cycle
        leader_a = int(scope_a.members[0])
        ecc_sel = scope_a.ecc(leader_a)
        sim.charge_exchange(2 * (sa - 1), max(1, 2 * ecc_sel),
                            Message(MessageKind.VERIFIED, (bridge.v, bridge.w)))
        # --- buildBridge + two renumber floods
        sim.charge_exchange(1, 1, Message(MessageKind.BUILD_BRIDGE, (bridge.w2, sa)))
        scope_b = sim.make_scope(B)
        ecc_a = scope_a.ecc(bridge.v)
        ecc_b = scope_b.ecc(bridge.w)
        sim.charge_exchange(sa - 1, max(1, ecc_a), Message(MessageKind.RENUMBER, (1, sb)))
        sim.charge_exchange(sb - 1, max(1, ecc_b),
                            Message(MessageKind.RENUMBER, (1, sa, 1)))
        merged = renumber_merged(bridge, A, B)
        del st.cycles[a], st.cycles[b]
        set_cycle_arrays(a, merged)
        return 4 + 2 * ecc_sel + 1 + max(ecc_a, ecc_b)

    def run_level(level: int) -> None:
        if level > total_levels:
            finish()
            return
        st.levels_executed += 1
        live = sorted(st.cycles)
        pair_rounds = [0]
        merged_pairs = []
        for i in range(0, len(live) - 1, 2):
            a, b = live[i], live[i + 1]
            pair_rounds.append(merge_pair(a, b, level))
            merged_pairs.append((a, b))
        # color halving: every node updates locally, no communication
        remap = {c: math.ceil(c / 2) for c in sorted(st.cycles)}
        st.cycles = {remap[c]: order for c, order in st.cycles.items()}
        for c, order in st.cycles.items():
            node_color[order] = c
        st.level_log.append({"level": level, "pairs": merged_pairs,
                             "live_after": len(st.cycles)})
        if level_hook is not None:
            level_hook(level, dict(st.cycles))
        span = max(pair_rounds)
        sim._account_span(sim.round + span - 1)
        sim.at_round(sim.round + max(1, span), lambda: run_level(level + 1))

    def finish() -> None:
        if len(st.cycles) != 1:
            sim.fail(FailureReason.NO_BRIDGE_FOUND,
                     f"{len(st.cycles)} cycles remain after {total_levels} levels")
        st.final_order = next(iter(st.cycles.values()))

    _phase1(sim, g, k0, steps_mult, phase2_start, step_hook=step_hook)
    report = sim.run()
    cert = None
    if report.success and st.final_order is not None:
        cert = HcCertificate.from_cycle([int(x) for x in st.final_order])
    elif report.success:
        report.success = False
        report.failure_reason = FailureReason.STEP_BUDGET_EXCEEDED
        report.failure_detail = "quiescent without completing"
    report.extras["num_colors"] = k0
    report.extras["merge_levels"] = st.levels_executed
    report.extras["level_log"] = st.level_log
    report.extras["partition_sizes"] = st.p1_sizes
    return report, cert
