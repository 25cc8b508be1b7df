"""Acceptance gate: one test per criterion, at the stated parameters and
tolerances, each printing a single PASS/FAIL line.

Criteria 3 and 4 are executed exactly as specified.  Their success-rate
clauses are not attainable with the edge-consuming rotation rule at those
densities (measured per-class failure rates are far above what 64-to-148
simultaneous class successes would require); those tests report the
measured rates and fail honestly when below threshold.  The healthy-density
runs (criterion 5 and the supplementary batch under criterion 7) show the
same machinery succeeding end to end.
"""

import math
import time

import numpy as np
import pytest

from hamsim import rng
from hamsim.cli import ExperimentConfig, run_experiment
from hamsim.dhc import assign_colors, num_colors_delta, run_dhc1, run_dhc2
from hamsim.graph import GnpParams, Graph, generate_gnp
from hamsim.rotation import run_dra
from hamsim.runtime import dra_step_budget
from hamsim.upcast import run_upcast
from hamsim.verify import (
    HcCertificate,
    brute_force_hamiltonian,
    check_certificate,
    cycle_order_is_hc,
)

# every run in this module contributes its bandwidth/slot check counters
CONGEST_TALLY = {"checks": 0, "violations": 0}


def _tally(report):
    CONGEST_TALLY["checks"] += report.congest_checks
    CONGEST_TALLY["violations"] += report.congest_violations
    return report


def _acceptance_line(num, ok, detail):
    print(f"\nACCEPTANCE {num}: {'PASS' if ok else 'FAIL'} - {detail}")


# ---------------------------------------------------------------------------
# criterion 1: rotation step bound and success rate at n=1000


@pytest.fixture(scope="module")
def dra_1000_runs():
    n, c = 1000, 12
    p = c * math.log(n) / n
    out = []
    t0 = time.perf_counter()
    for seed in range(100):
        g = generate_gnp(GnpParams(n, p, seed))
        rep, order = run_dra(g, seed=seed)
        ok_cert = False
        if rep.success:
            ok_cert = check_certificate(g, HcCertificate.from_cycle(order)).ok
        out.append((seed, _tally(rep), ok_cert))
    return out, time.perf_counter() - t0


def test_criterion_01_dra_step_bound(dra_1000_runs):
    runs, wall = dra_1000_runs
    budget = math.ceil(7 * 1000 * math.log(1000))
    succ = [r for _, r, _ in runs if r.success]
    within = all(r.steps <= budget for r in succ)
    certs_ok = all(ok for _, r, ok in runs if r.success)
    ok = len(succ) >= 90 and within and certs_ok and wall < 120.0
    _acceptance_line(
        1, ok,
        f"success {len(succ)}/100, max steps "
        f"{max((r.steps for r in succ), default=0)} <= {budget}, wall {wall:.0f}s < 120s",
    )
    assert len(succ) >= 90
    assert within and certs_ok
    assert wall < 120.0


# ---------------------------------------------------------------------------
# criterion 2: rotation event properties, >= 10,000 events, zero violations


def test_criterion_02_rotation_properties():
    events = 0
    violations = 0
    sizes_memo: dict[int, dict[int, int]] = {}

    n, p = 200, 0.4
    seed = 0
    while events < 10_000:
        g = generate_gnp(GnpParams(n, p, seed))
        last_sizes: dict[int, int] = {}

        def hook(core):
            nonlocal events, violations
            events += 1
            snap = core.snapshot()
            if len(set(snap)) != len(snap):
                violations += 1
            elif not all(g.has_edge(snap[i], snap[i + 1]) for i in range(len(snap) - 1)):
                violations += 1
            for v, lst in core.unused.items():
                prev = last_sizes.get(v)
                if prev is not None and len(lst) > prev:
                    violations += 1
                last_sizes[v] = len(lst)

        rep, _ = run_dra(g, seed=seed, step_hook=hook)
        _tally(rep)
        seed += 1

    # renumbering involution, exact, over every (h, j) shape
    for h in range(2, 120):
        for j in range(1, h):
            idx = np.arange(j + 1, h + 1)
            once = h + j + 1 - idx
            if not np.array_equal(h + j + 1 - once, idx):
                violations += 1
            if not np.array_equal(np.sort(once), idx):
                violations += 1

    ok = events >= 10_000 and violations == 0
    _acceptance_line(2, ok, f"{events} events checked, {violations} violations")
    assert events >= 10_000
    assert violations == 0


# ---------------------------------------------------------------------------
# criterion 3: DHC1 end to end at the stated density


@pytest.fixture(scope="module")
def dhc1_criterion_runs():
    n = 4096
    p = 2 * math.log(n) / math.sqrt(n)
    out = []
    for seed in range(20):
        g = generate_gnp(GnpParams(n, p, seed))
        degrees = g.degrees().copy()
        rep, cert = run_dhc1(g, seed=seed)
        cert_ok = bool(rep.success and cert is not None and check_certificate(g, cert).ok)
        out.append({
            "seed": seed, "report": _tally(rep), "cert_ok": cert_ok,
            "degrees": degrees,
        })
        del g
    return out


def test_criterion_03_dhc1_end_to_end(dhc1_criterion_runs):
    n = 4096
    succ = [r for r in dhc1_criterion_runs if r["report"].success]
    certs_ok = all(r["cert_ok"] for r in succ)
    lo, hi = math.sqrt(n) / 2, 1.5 * math.sqrt(n)
    samples = in_range = 0
    for r in dhc1_criterion_runs:
        sizes = np.bincount(assign_colors(r["seed"], n, 64), minlength=65)[1:]
        samples += len(sizes)
        in_range += int(((sizes >= lo) & (sizes <= hi)).sum())
    size_frac = in_range / samples
    ok = len(succ) >= 18 and certs_ok and size_frac >= 0.95
    _acceptance_line(
        3, ok,
        f"success {len(succ)}/20 (need >= 18), certificates ok: {certs_ok}, "
        f"partition sizes in [{lo:.0f}, {hi:.0f}]: {size_frac:.3f} (need >= 0.95)",
    )
    assert size_frac >= 0.95
    assert certs_ok
    assert len(succ) >= 18, (
        f"{len(succ)}/20 runs succeeded at p = 2 ln n / sqrt n; the "
        "edge-consuming rotation rule measures ~39% per-class failure at "
        "this density (class size ~64, p=0.26), so all-64-classes success "
        "is statistically impossible; see the decisions ledger"
    )


# ---------------------------------------------------------------------------
# criterion 4: DHC2 end to end at the stated density


@pytest.fixture(scope="module")
def dhc2_criterion_runs():
    n = 4096
    delta = 0.4
    p = math.log(n) / n ** delta
    out = []
    for seed in range(20):
        g = generate_gnp(GnpParams(n, p, seed))
        level_ok = {"ok": True}

        def hook(level, cycles, _g=g, _flag=level_ok):
            total = 0
            for order in cycles.values():
                total += len(order)
                s = len(order)
                if not all(_g.has_edge(int(order[i]), int(order[(i + 1) % s]))
                           for i in range(s)):
                    _flag["ok"] = False
            if total != n:
                _flag["ok"] = False

        rep, cert = run_dhc2(g, delta=delta, seed=seed, level_hook=hook)
        cert_ok = bool(rep.success and cert is not None and check_certificate(g, cert).ok)
        out.append({
            "seed": seed, "report": _tally(rep), "cert_ok": cert_ok,
            "levels": rep.extras["merge_levels"], "level_log": rep.extras["level_log"],
            "levels_valid": level_ok["ok"],
        })
        del g
    return out


def test_criterion_04_dhc2_end_to_end(dhc2_criterion_runs):
    n = 4096
    expected_levels = math.ceil(math.log2(num_colors_delta(n, 0.4)))   # 8
    succ = [r for r in dhc2_criterion_runs if r["report"].success]
    levels_exact = all(r["levels"] == expected_levels for r in succ)
    certs_ok = all(r["cert_ok"] for r in succ)
    cycles_valid = all(r["levels_valid"] for r in succ)
    bridged = all(
        all(len(lv["pairs"]) > 0 or lv["live_after"] == 1 for lv in r["level_log"])
        for r in succ
    )
    ok = len(succ) >= 18 and levels_exact and certs_ok and cycles_valid and bridged
    _acceptance_line(
        4, ok,
        f"success {len(succ)}/20 (need >= 18), levels == {expected_levels}: "
        f"{levels_exact}, per-level cycles valid: {cycles_valid}, "
        f"bridges at every level: {bridged}, certificates ok: {certs_ok}",
    )
    assert levels_exact and certs_ok and cycles_valid and bridged
    assert len(succ) >= 18, (
        f"{len(succ)}/20 runs succeeded at p = ln n / n^0.4 with 148 color "
        "classes of mean size ~28; that density sits at the class "
        "connectivity threshold (expected isolated-in-class vertices "
        "~ n^(1-c) = 1 at c=1) and the per-class rotation failure rate is "
        "~91%, so the stated 90% target is statistically impossible; see "
        "the decisions ledger"
    )


# ---------------------------------------------------------------------------
# criterion 5: DHC2 scaling shape (c = 4.25 chosen; the criterion fixes
# delta and the sizes but not c, and p must stay below 1 at n = 1024)


@pytest.fixture(scope="module")
def dhc2_scaling_runs():
    c, delta = 4.25, 0.5
    out = {}
    for n in (1024, 4096, 16384):
        p = c * math.log(n) / n ** delta
        rows = []
        for seed in range(10):
            g = generate_gnp(GnpParams(n, p, 100 + seed))
            rep, cert = run_dhc2(g, delta=delta, seed=100 + seed)
            cert_ok = bool(rep.success and cert is not None
                           and check_certificate(g, cert).ok)
            rows.append({
                "report": _tally(rep), "cert_ok": cert_ok, "seed": 100 + seed,
                "degrees": g.degrees().copy() if n == 4096 else None,
                "colors": assign_colors(100 + seed, n, num_colors_delta(n, delta)),
            })
            del g
        out[n] = rows
    return out


def test_criterion_05_dhc2_scaling_shape(dhc2_scaling_runs):
    medians = {}
    succ_counts = {}
    for n, rows in dhc2_scaling_runs.items():
        rounds = sorted(r["report"].rounds for r in rows)
        medians[n] = rounds[len(rounds) // 2]
        succ_counts[n] = sum(r["report"].success for r in rows)
    r1 = medians[4096] / medians[1024]
    r2 = medians[16384] / medians[4096]
    ok = 1.2 <= r1 <= 4.5 and 1.2 <= r2 <= 4.5
    _acceptance_line(
        5, ok,
        f"median rounds {medians} (successes {succ_counts}), "
        f"ratios {r1:.2f} and {r2:.2f} must lie in [1.2, 4.5]",
    )
    assert 1.2 <= r1 <= 4.5
    assert 1.2 <= r2 <= 4.5


# ---------------------------------------------------------------------------
# criterion 6: upcast behavior, memory contrast included


@pytest.fixture(scope="module")
def upcast_runs():
    n = 4096
    p = 3 * math.log(n) / math.sqrt(n)
    out = []
    for seed in range(20):
        g = generate_gnp(GnpParams(n, p, seed))
        rep, cert = run_upcast(g, seed=seed, cprime=3.0)
        cert_ok = bool(rep.success and cert is not None and check_certificate(g, cert).ok)
        out.append({"seed": seed, "report": _tally(rep), "cert_ok": cert_ok})
        del g
    return out


def test_criterion_06_upcast(upcast_runs):
    n = 4096
    round_budget = 20 * math.sqrt(n) * math.log(n) ** 2
    depth2 = sum(1 for r in upcast_runs if r["report"].extras.get("bfs_depth") == 2)
    succ = [r for r in upcast_runs if r["report"].success]
    certs_ok = all(r["cert_ok"] for r in succ)
    rounds_ok = all(r["report"].rounds <= round_budget for r in upcast_runs)
    mem_ok = True
    for r in succ:
        rep = r["report"]
        root = rep.extras["root"]
        peaks = rep.peak_memory_words
        if peaks[root] < n:
            mem_ok = False
        if max(w for v, w in peaks.items() if v != root) > n // 8:
            mem_ok = False
    ok = (depth2 >= 18 and len(succ) >= 18 and certs_ok and rounds_ok and mem_ok)
    _acceptance_line(
        6, ok,
        f"depth==2 on {depth2}/20, success {len(succ)}/20, rounds <= "
        f"{round_budget:.0f}: {rounds_ok}, root >= n and non-root <= n/8: {mem_ok}",
    )
    assert depth2 >= 18
    assert len(succ) >= 18
    assert certs_ok and rounds_ok and mem_ok


# ---------------------------------------------------------------------------
# criterion 7: fully-distributed memory contract over every successful
# dhc trial at n=4096 executed by this suite (criteria 3-5 plus a
# healthy-density batch so the check cannot be vacuous)


@pytest.fixture(scope="module")
def dhc1_healthy_runs():
    n = 4096
    p = 5 * math.log(n) / math.sqrt(n)
    out = []
    for seed in range(5):
        g = generate_gnp(GnpParams(n, p, 300 + seed))
        rep, cert = run_dhc1(g, seed=300 + seed)
        cert_ok = bool(rep.success and cert is not None and check_certificate(g, cert).ok)
        out.append({
            "seed": 300 + seed, "report": _tally(rep), "cert_ok": cert_ok,
            "degrees": g.degrees().copy(),
            "colors": assign_colors(300 + seed, n, 64),
        })
        del g
    return out


def _memory_contract_violations(n, report, degrees, colors):
    """Per node: peak <= max(8 * (degree + own partition size), n/8)."""
    sizes = np.bincount(colors, minlength=int(colors.max()) + 1)
    part_size = sizes[colors]
    bound = np.maximum(8 * (degrees + part_size), n // 8)
    peaks = report.peak_memory_words
    return sum(1 for v in range(n) if peaks[v] > bound[v])


def test_criterion_07_memory_contract(
    dhc1_criterion_runs, dhc2_criterion_runs, dhc2_scaling_runs, dhc1_healthy_runs
):
    n = 4096
    checked = 0
    bad = 0
    for r in dhc1_criterion_runs:
        if r["report"].success:
            checked += 1
            colors = assign_colors(r["seed"], n, 64)
            bad += _memory_contract_violations(n, r["report"], r["degrees"], colors)
    for r in dhc1_healthy_runs:
        if r["report"].success:
            checked += 1
            bad += _memory_contract_violations(n, r["report"], r["degrees"], r["colors"])
    for r in dhc2_scaling_runs[4096]:
        if r["report"].success:
            checked += 1
            bad += _memory_contract_violations(n, r["report"], r["degrees"], r["colors"])
    ok = checked > 0 and bad == 0
    _acceptance_line(
        7, ok, f"{checked} successful n=4096 dhc trials checked, {bad} node violations"
    )
    assert checked > 0, "no successful dhc trials to check"
    assert bad == 0


# ---------------------------------------------------------------------------
# criterion 8: oracle equivalence on small instances


def test_criterion_08_oracle_equivalence():
    import itertools

    def naive(g, cert):
        n = g.n
        if n < 3 or cert.n != n:
            return False
        for perm in itertools.permutations(range(1, n)):
            order = (0,) + perm
            if all(
                sorted((order[i - 1], order[(i + 1) % n])) ==
                sorted(int(x) for x in cert.mates[order[i]])
                for i in range(n)
            ) and all(g.has_edge(order[i], order[(i + 1) % n]) for i in range(n)):
                return True
        return False

    mism = 0
    rng_ = np.random.default_rng(0)
    for trial in range(1000):
        n = int(rng_.integers(3, 9))
        g = generate_gnp(GnpParams(n, float(rng_.uniform(0.2, 1.0)), trial))
        base = list(range(n))
        rng_.shuffle(base)
        cert = HcCertificate.from_cycle(base)
        if trial % 2:
            cert.mates[int(rng_.integers(n)), int(rng_.integers(2))] = int(rng_.integers(n))
        if check_certificate(g, cert).ok != naive(g, cert):
            mism += 1

    petersen = Graph.from_edges(10, [
        (0, 1), (1, 2), (2, 3), (3, 4), (0, 4),
        (5, 7), (7, 9), (9, 6), (6, 8), (8, 5),
        (0, 5), (1, 6), (2, 7), (3, 8), (4, 9),
    ])
    petersen_rejected = brute_force_hamiltonian(petersen) is None
    k5 = generate_gnp(GnpParams(5, 1.0, 0))
    k5_cycle = brute_force_hamiltonian(k5)
    k5_ok = k5_cycle is not None and check_certificate(
        k5, HcCertificate.from_cycle(k5_cycle)).ok
    ok = mism == 0 and petersen_rejected and k5_ok
    _acceptance_line(
        8, ok,
        f"1000 certificates: {mism} oracle mismatches; Petersen rejected: "
        f"{petersen_rejected}; K5 accepted: {k5_ok}",
    )
    assert mism == 0 and petersen_rejected and k5_ok


# ---------------------------------------------------------------------------
# criterion 9: byte-level determinism of the harness


def test_criterion_09_determinism(tmp_path):
    def csv_body(path):
        with open(path) as fh:
            return [ln.rsplit(",", 1)[0] for ln in fh.read().strip().split("\n")]

    identical = True
    for algo, extra in (("dra", {}), ("dhc1", {}), ("dhc2", {"delta": 0.5}),
                        ("upcast", {})):
        f1, f2 = tmp_path / f"{algo}1.csv", tmp_path / f"{algo}2.csv"
        cfg = dict(algo=algo, n=256, p=0.7, trials=2, seed=5, **extra)
        run_experiment(ExperimentConfig(**cfg, out=str(f1)))
        run_experiment(ExperimentConfig(**cfg, out=str(f2)))
        if csv_body(f1) != csv_body(f2):
            identical = False

    transcripts_equal = True
    for algo, runner in (("dra", lambda g, s, t: run_dra(g, seed=s, transcript=t)),
                         ("upcast", lambda g, s, t: run_upcast(g, seed=s, transcript=t))):
        g = generate_gnp(GnpParams(48, 0.6, 9))
        t1, t2 = [], []
        _tally(runner(g, 9, t1)[0])
        _tally(runner(g, 9, t2)[0])
        if t1 != t2:
            transcripts_equal = False

    ok = identical and transcripts_equal
    _acceptance_line(
        9, ok,
        f"CSV bodies identical (wall_ms excluded): {identical}; "
        f"transcripts identical: {transcripts_equal}",
    )
    assert identical and transcripts_equal


# ---------------------------------------------------------------------------
# criterion 10: bandwidth and per-edge occupancy checks, zero failures


def test_criterion_10_congest_compliance(
    dra_1000_runs, dhc1_criterion_runs, dhc2_criterion_runs, dhc2_scaling_runs,
    upcast_runs, dhc1_healthy_runs,
):
    # strict-mode spot runs re-execute each algorithm with every service
    # hop materialized through the per-edge-per-round occupancy map
    g = generate_gnp(GnpParams(256, 0.7, 1))
    for runner in (
        lambda: run_dra(g, seed=1, strict=True)[0],
        lambda: run_dhc1(g, seed=1, num_colors=8, strict=True)[0],
        lambda: run_dhc2(g, 0.5, seed=1, num_colors=8, strict=True)[0],
        lambda: run_upcast(g, seed=1, strict=True)[0],
    ):
        _tally(runner())
    checks, violations = CONGEST_TALLY["checks"], CONGEST_TALLY["violations"]
    ok = checks > 0 and violations == 0
    _acceptance_line(10, ok, f"{checks} bandwidth/occupancy checks, {violations} failures")
    assert checks > 0
    assert violations == 0
