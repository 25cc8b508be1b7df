import math

import numpy as np
import pytest

from hamsim.graph import GnpParams, Graph, bfs_levels, generate_gnp
from hamsim.runtime import FailureReason, Simulator
from hamsim.upcast import build_bfs, elect_leader, run_upcast, sample_edges
from hamsim.verify import check_certificate


def test_elect_leader_examples():
    k4 = generate_gnp(GnpParams(4, 1.0, 0))
    sim = Simulator(k4, 0)
    leader, end = elect_leader(sim, at=1)
    assert leader == 0 and end - 1 <= 2

    path = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3)])
    sim = Simulator(path, 0)
    leader, end = elect_leader(sim, at=1)
    assert leader == 0 and end - 1 <= 4


def test_elect_leader_disconnected():
    two = Graph.from_edges(4, [(0, 1), (2, 3)])
    sim = Simulator(two, 0)
    rep_holder = {}

    class D:
        pass

    from hamsim.runtime import NodeProgram

    class P(NodeProgram):
        def on_init(self, ctx):
            if ctx.node == 0:
                ctx.wake(1)

        def on_round(self, ctx):
            elect_leader(ctx.sim)

    for v in range(4):
        sim.install(v, P())
    rep = sim.run()
    assert rep.failure_reason == FailureReason.PARTITION_DISCONNECTED


def test_elect_leader_rounds_vs_diameter():
    g = generate_gnp(GnpParams(300, 0.04, 5))
    from hamsim.graph import diameter
    d = diameter(g)
    if d is None:
        pytest.skip("disconnected sample")
    sim = Simulator(g, 5)
    leader, end = elect_leader(sim, at=1)
    assert leader == 0
    assert end - 1 <= d + 1


def test_build_bfs_star_and_cycle():
    star = Graph.from_edges(5, [(0, i) for i in range(1, 5)])
    sim = Simulator(star, 1)
    tree, _ = build_bfs(sim, 0)
    assert tree.depth == 1
    assert (tree.level[1:] == 1).all()
    assert (tree.parent[1:] == 0).all()
    assert tree.subtree_size[0] == 5

    c8 = Graph.from_edges(8, [(i, (i + 1) % 8) for i in range(8)])
    sim = Simulator(c8, 1)
    tree, _ = build_bfs(sim, 0)
    assert sorted(tree.level.tolist()) == [0, 1, 1, 2, 2, 3, 3, 4]


def test_build_bfs_tree_structure_random():
    g = generate_gnp(GnpParams(200, 0.06, 3))
    levels = bfs_levels(g, 0)
    if len(levels) != g.n:
        pytest.skip("disconnected sample")
    sim = Simulator(g, 3)
    tree, _ = build_bfs(sim, 0)
    for v in range(1, g.n):
        p_ = int(tree.parent[v])
        assert g.has_edge(v, p_)
        assert tree.level[v] == levels[v] == tree.level[p_] + 1
    assert int(tree.subtree_size[0]) == g.n
    # DFS intervals partition [0, n)
    ivals = sorted((int(tree.interval[v]), int(tree.subtree_size[v])) for v in range(g.n))
    assert ivals[0][0] == 0
    seen = np.zeros(g.n, bool)
    for start, size in ((int(tree.interval[v]), int(tree.subtree_size[v]))
                        for v in range(g.n)):
        assert 0 <= start and start + size <= g.n
    assert len({int(tree.interval[v]) for v in range(g.n)}) == g.n


def test_sample_counts():
    g = generate_gnp(GnpParams(100, 0.3, 4))
    sim = Simulator(g, 4)
    tree, _ = build_bfs(sim, 0)
    samples = sample_edges(sim, tree, cprime=3.0)
    want = math.ceil(3.0 * math.log(100))
    assert tree.root not in samples
    for v, recs in samples.items():
        assert len(recs) == min(want, g.degree(v))
        assert len({w for _, w in recs}) == len(recs)          # without replacement
        for a, b in recs:
            assert a == v and g.has_edge(a, b)


def test_chain_pipeline_trace():
    """Depth-3 chain: records drain with no pipeline bubbles.  The chain has
    no cycle, so the run ends in a clean root-solve failure after the
    pipeline completes."""
    chain = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3)])
    rep, cert = run_upcast(chain, seed=1, cprime=0.1, strict=True)
    assert not rep.success and cert is None
    assert rep.failure_reason == FailureReason.ROOT_SOLVE_FAILED
    # cprime 0.1 -> 1 sampled edge per node, plus 1 address record each:
    # 6 records through the bottleneck edge, pipelined <= records + depth - 1
    assert rep.phase_rounds["upcast"] <= 6 + 3 - 1
    assert rep.congest_violations == 0


def test_upcast_end_to_end_small_strict():
    g = generate_gnp(GnpParams(64, 0.6, 3))
    rep, cert = run_upcast(g, seed=3, cprime=3.0, strict=True)
    assert rep.success, rep.failure_detail
    assert check_certificate(g, cert).ok
    assert rep.congest_violations == 0
    # upcast conservation: the root holds exactly the union of samples
    sim = Simulator(g, 3)
    tree, _ = build_bfs(sim, 0)
    samples = sample_edges(sim, tree, cprime=3.0)
    expected = {(min(a, b), max(a, b)) for recs in samples.values() for a, b in recs}
    assert rep.extras["collected_edges"] == len(expected)


def test_upcast_hc_edges_subset_of_graph():
    g = generate_gnp(GnpParams(80, 0.5, 7))
    rep, cert = run_upcast(g, seed=7)
    assert rep.success
    for v in range(g.n):
        for w in cert.mates[v]:
            assert g.has_edge(v, int(w))


def test_upcast_memory_contrast():
    g = generate_gnp(GnpParams(512, 0.35, 5))
    rep, cert = run_upcast(g, seed=5)
    assert rep.success, rep.failure_detail
    peaks = rep.peak_memory_words
    root = rep.extras["root"]
    nonroot = max(w for v, w in peaks.items() if v != root)
    assert peaks[root] > 4 * nonroot       # the root carries the bulk
    assert rep.extras["record_bits"] <= rep.extras["bandwidth_bits"]


def test_bfs_subtree_loads_balanced():
    n = 1024
    p = 3 * math.log(n) / math.sqrt(n)
    g = generate_gnp(GnpParams(n, p, 6))
    sim = Simulator(g, 6)
    tree, _ = build_bfs(sim, 0)
    kids = tree.children[0]
    loads = tree.subtree_size[kids]
    assert loads.sum() == n - 1
    assert loads.max() <= 4 * max(loads.mean(), 1.0)


def test_phase_rounds_sum_to_total():
    g = generate_gnp(GnpParams(128, 0.5, 4))
    rep, _ = run_upcast(g, seed=4)
    assert sum(rep.phase_rounds.values()) == rep.rounds


def test_upcast_determinism():
    g = generate_gnp(GnpParams(100, 0.4, 8))
    r1, c1 = run_upcast(g, seed=8)
    r2, c2 = run_upcast(g, seed=8)
    assert (r1.rounds, r1.messages) == (r2.rounds, r2.messages)
    assert np.array_equal(c1.mates, c2.mates)
