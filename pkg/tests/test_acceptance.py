"""Acceptance criteria, one test each.

Every test records a one-line verdict that the terminal summary prints under
"acceptance criteria", then asserts. Thresholds are fixed here and are never
relaxed to make a run pass.
"""

import itertools
import shutil
import statistics
import subprocess
import sys
import time

import numpy as np
import pytest

from conftest import connected_topology, record
from meshroute.bbbc import BbbcConfig, optimize_continuous, optimize_path
from meshroute.fuzzy import default_system, defuzzify, infer
from meshroute.oracle import brute_force_shortest, dijkstra

SYSTEM = default_system()
TRACES = []  # best-cost traces gathered by criteria 2 and 3 for criterion 7


def _check(criterion, passed, detail):
    record(criterion, bool(passed), detail)
    assert passed, detail


def test_criterion_1_oracle_cross_validation():
    mismatches = 0
    for seed in range(200):
        n = 4 + seed % 9
        topo = connected_topology(n, seed, system=SYSTEM)
        a, b = dijkstra(topo, 1, n), brute_force_shortest(topo, 1, n)
        mismatches += (a.nodes, a.cost) != (b.nodes, b.cost)
    _check(1, mismatches == 0, f"dijkstra == brute force on 200 topologies (n=4..12), {mismatches} mismatches")


def test_criterion_2_optimality_bound():
    violations, runs, exact = 0, 0, 0
    for n in (10, 25, 50):
        for seed in range(100):
            topo = connected_topology(n, seed, system=SYSTEM)
            path, trace = optimize_path(topo, 1, n, config=BbbcConfig(seed=seed))
            TRACES.append(trace.best_costs)
            gap = path.cost - dijkstra(topo, 1, n).cost
            violations += gap < 0
            exact += gap == 0
            runs += 1
    _check(2, violations == 0,
           f"{runs} runs at n=10/25/50, {violations} below the optimum ({exact} exactly optimal)")


def test_criterion_3_small_instance_exactness():
    hits = 0
    for seed in range(100):
        n = 5 + seed % 5  # 5..9 nodes
        topo = connected_topology(n, seed, system=SYSTEM)
        path, trace = optimize_path(topo, 1, n, config=BbbcConfig(20, 100, seed=seed))
        TRACES.append(trace.best_costs)
        best = brute_force_shortest(topo, 1, n)
        hits += (path.nodes, path.cost) == (best.nodes, best.cost)
    _check(3, hits >= 95, f"BB-BC matched the brute-force optimum in {hits}/100 seeds (need >= 95)")


def test_criterion_4_continuous_convergence():
    def sphere(x):
        return float(x @ x)

    values = []
    for seed in range(100):
        best, _ = optimize_continuous(sphere, ([-10.0] * 5, [10.0] * 5), BbbcConfig(50, 500, seed=seed))
        values.append(sphere(best))
    hits = sum(v < 1e-3 for v in values)
    _check(4, hits >= 95,
           f"sphere on [-10,10]^5 below 1e-3 in {hits}/100 seeds (worst {max(values):.2e}, need >= 95)")


def test_criterion_5_fuzzy_monotonicity():
    axes = [np.linspace(lo, hi, 9) for lo, hi in ((0, 1), (0, 100), (0, 20), (0, 1))]
    table = {
        idx: defuzzify(infer(SYSTEM, [axes[a][i] for a, i in enumerate(idx)]))
        for idx in itertools.product(range(9), repeat=4)
    }
    direction = (-1, +1, +1, -1)
    violations = 0
    for idx, c in table.items():
        for a in range(4):
            if idx[a] < 8:
                nxt = idx[:a] + (idx[a] + 1,) + idx[a + 1:]
                violations += (table[nxt] - c) * direction[a] < -1e-12
    _check(5, violations == 0, f"9^4 grid, one axis at a time: {violations} monotonicity violations")


def test_criterion_6_midpoint_symmetry():
    c = defuzzify(infer(SYSTEM, (0.5, 50.0, 10.0, 0.5)))
    _check(6, abs(c - 0.5) <= 1e-9, f"all-Medium-peak inputs cost {c!r} (target 0.5 +/- 1e-9)")


def test_criterion_7_elitism():
    if not TRACES:
        pytest.skip("needs the traces from criteria 2 and 3 in the same session")
    bad = sum(any(b > a for a, b in zip(t, t[1:])) for t in TRACES)
    _check(7, bad == 0, f"{len(TRACES)} traces from criteria 2-3, {bad} with a best-cost increase")


def test_criterion_8_scaling_trend():
    medians = {}
    for n in (25, 50, 100):
        times = []
        for seed in range(10):
            topo = connected_topology(n, seed, system=SYSTEM)
            start = time.perf_counter()
            optimize_path(topo, 1, n, config=BbbcConfig(20, 100, seed=seed))
            times.append(time.perf_counter() - start)
        medians[n] = statistics.median(times)
    ok = medians[25] < medians[50] < medians[100]
    shown = ", ".join(f"n={n}: {t:.3f}s" for n, t in medians.items())
    _check(8, ok, f"median wall time over 10 seeds at 100 generations: {shown}")


def _cli(*args, cwd):
    exe = shutil.which("meshroute")
    cmd = [exe] if exe else [sys.executable, "-m", "meshroute.cli"]
    done = subprocess.run(cmd + [str(a) for a in args], cwd=cwd, capture_output=True, check=True)
    return done.stdout


def test_criterion_9_determinism(tmp_path):
    _cli("gen", "--n", 50, "--seed", 21, "--out", "t.wmn", cwd=tmp_path)
    (tmp_path / "s.cfg").write_text(
        "n=30\nepochs=4\njoins_per_epoch=2\nleaves_per_epoch=2\ngenerations=40\nseed=8\n"
    )
    route = ("route", "t.wmn", "--seed", 4, "--no-timing", "--trace-out", "-")
    sim = ("sim", "s.cfg", "--no-timing")
    same_route = _cli(*route, cwd=tmp_path) == _cli(*route, cwd=tmp_path)
    same_sim = _cli(*sim, cwd=tmp_path) == _cli(*sim, cwd=tmp_path)

    # with timings on, only the wall-clock column may differ
    def strip_time(text):
        rows = text.decode().splitlines()
        return [",".join(r.split(",")[:4] + r.split(",")[5:]) for r in rows]

    timed = strip_time(_cli("sim", "s.cfg", cwd=tmp_path)) == strip_time(_cli(*sim, cwd=tmp_path))
    _check(9, same_route and same_sim and timed,
           f"byte-identical reruns with --no-timing: route={same_route} sim={same_sim}; "
           f"timed sim differs only in time_sec={timed}")
