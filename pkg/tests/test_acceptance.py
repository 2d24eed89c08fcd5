"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the summary lines are
printed even without ``-s``.
"""

import time

import numpy as np
import pytest

from cpwlnet.compiler import compile_deep, compile_two_layer, plan_two_layer, verify_varphi_decomposition
from cpwlnet.cpwl import CpwlFunction, Grid, check_interp_error, sup_distance
from cpwlnet.kst import demo_problem, outer_segments, rate_experiment
from cpwlnet.network import compose_serial
from cpwlnet.regions import to_cpwl
from cpwlnet.shallow import SigmaNFunction
from cpwlnet.shatter import scaling_audit, shatter_experiment

from conftest import hat_net, random_target, rational_target

# tolerances and limits
EXACT_REL_TOL = 1e-8
DEEP_TOL = 1e-8
INTERP_TOL = 1e-10
BOUND_SLACK = 1e-9
SLOPE_N_RANGE = (-2.3, -1.7)
SLOPE_L_RANGE = (-1.3, -0.7)
R2_MIN = 0.95
TWO_LAYER_SECONDS = 60
DEEP_SECONDS = 60
KST_SECONDS = 300


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {n}] {'PASS' if ok else 'FAIL'}: {detail}")
        return ok

    return emit


def test_criterion_1_exact_representation(report):
    rng = np.random.default_rng(1)
    worst, widths_ok, count = 0.0, True, 0
    t0 = time.perf_counter()
    for N in range(4, 11):
        for M in range(4, 11):
            for _ in range(100):
                t = random_target(rng, N * M)
                net = compile_two_layer(t, N, M)
                widths_ok &= net.hidden_widths == (3 * N + 1, 3 * (M - 2))
                d = sup_distance(to_cpwl(net), t) / (1 + np.max(np.abs(t.values)))
                worst = max(worst, d)
                count += 1
    elapsed = time.perf_counter() - t0
    exact = []
    for _ in range(10):
        N, M = int(rng.integers(2, 6)), int(rng.integers(3, 8))
        t = rational_target(rng, N * M)
        exact.append(sup_distance(to_cpwl(compile_two_layer(t, N, M)), t))
    ok = worst <= EXACT_REL_TOL and widths_ok and elapsed < TWO_LAYER_SECONDS and all(d == 0 for d in exact)
    report(1, ok, f"{count} targets, worst scaled distance {worst:.2e}, widths ok={widths_ok}, "
                  f"{elapsed:.1f}s; rational distances {sorted(set(exact))}")
    assert ok


def test_criterion_2_depth_conversion(report):
    rng = np.random.default_rng(2)
    worst, shape_ok, count = 0.0, True, 0
    t0 = time.perf_counter()
    for N in (3, 5):
        for L in (1, 2, 4):
            for _ in range(50):
                t = random_target(rng, int(rng.integers(1, N * N * L + 1)))
                net = compile_deep(t, N, L)
                shape_ok &= net.hidden_depth == L + 1 and net.max_width <= 6 * N + 4
                worst = max(worst, sup_distance(to_cpwl(net), t))
                count += 1
    elapsed = time.perf_counter() - t0
    ok = worst <= DEEP_TOL and shape_ok and elapsed < DEEP_SECONDS
    report(2, ok, f"{count} targets, worst distance {worst:.2e}, depth/width ok={shape_ok}, {elapsed:.1f}s")
    assert ok


def test_criterion_3_decomposition_identity(report):
    rng = np.random.default_rng(3)
    violations = 0
    for _ in range(20):
        N, M = int(rng.integers(2, 7)), int(rng.integers(3, 9))
        rep = verify_varphi_decomposition(plan_two_layer(random_target(rng, N * M), N, M))
        violations += len(rep.violations)
    ok = violations == 0
    report(3, ok, f"20 plans, {violations} violations")
    assert ok


@pytest.mark.parametrize("n", [5, 10, 50])
def test_criterion_4_interpolation_error(report, n):
    rep = check_interp_error(lambda x: x * x, Grid.uniform(n))
    expected = 1 / (4 * n * n)
    ok = abs(rep.error - expected) <= INTERP_TOL
    report(4, ok, f"n={n}: measured {rep.error:.12g}, 1/(4n^2) = {expected:.12g}")
    assert ok


def test_criterion_5_kst_rate(report):
    p = demo_problem(0, 2)
    N_list, L_list = [2, 4, 8, 16], [1, 2, 4, 8]
    kinks = np.asarray(p.outer_spec["params"]["kinks"])
    # distance from every kink to the nearest node of every tested outer grid, in grid spacings
    gaps = []
    for N, L in [(N, 1) for N in N_list] + [(4, L) for L in L_list]:
        h = p.d / outer_segments(p.d, N, L)
        gaps.append(np.min(np.abs(kinks / h - np.round(kinks / h))))
    t0 = time.perf_counter()
    by_N = rate_experiment(p, N_list, [1])
    by_L = rate_experiment(p, [4], L_list)
    elapsed = time.perf_counter() - t0
    sN, sL = by_N.slopes_N[1], by_L.slopes_L[4]
    within = all(r.measured_error <= r.bound + BOUND_SLACK for r in by_N.records + by_L.records)
    ok = (
        SLOPE_N_RANGE[0] <= sN <= SLOPE_N_RANGE[1]
        and SLOPE_L_RANGE[0] <= sL <= SLOPE_L_RANGE[1]
        and within
        and min(gaps) > 1e-3
        and elapsed < KST_SECONDS
    )
    report(5, ok, f"slope vs N {sN:.3f}, slope vs L {sL:.3f}, all within bound={within}, "
                  f"min kink offset {min(gaps):.3f} spacings, {elapsed:.1f}s")
    assert ok


def test_criterion_6_shattering(report):
    cases = [(8, 0.01, 3, 2), (32, 0.005, 4, 3), (100, 1e-3, 10, 2)]
    parts, ok = [], True
    for n, delta, N, L in cases:
        rep = shatter_experiment(n, delta, 20, seed=n, N=N, L=L)
        counts_ok = all(t.shatter_count >= n / 6 for t in rep.trials)
        ok &= rep.successes == 20 and rep.consistent and counts_ok
        parts.append(f"n={n}: {rep.successes}/20, count {rep.trials[0].shatter_count} >= {n / 6:.1f}")
    sc = scaling_audit((16, 32, 64, 128, 256))
    ok &= sc.r_squared >= R2_MIN
    report(6, ok, "; ".join(parts) + f"; linear fit slope {sc.slope:.2f}, R^2 {sc.r_squared:.5f}")
    assert ok


def test_criterion_7_region_oracle(report):
    hat = hat_net()
    f = to_cpwl(compose_serial(hat, hat))
    saw_ok = list(f.nodes) == [0, 0.25, 0.5, 0.75, 1] and list(f.values) == [0, 1, 0, 1, 0]
    rng = np.random.default_rng(7)
    mismatches = 0
    for _ in range(100):
        n = int(rng.integers(2, 15))
        anchors = np.sort(rng.choice(np.arange(1, 1000), n, replace=False)) / 1000.0
        anchors[0] = 0.0
        phi = SigmaNFunction(anchors, rng.normal(size=n), float(rng.normal()))
        got = to_cpwl(phi.render())
        xs = np.concatenate([anchors, [1.0]])
        want = CpwlFunction(Grid(xs), phi(xs)).pruned()
        same = (
            got.segment_count == want.segment_count
            and np.allclose(got.nodes, want.nodes, rtol=0, atol=1e-12)
            and np.allclose(got.values, want.values, rtol=1e-12, atol=1e-12)
        )
        mismatches += not same
    ok = saw_ok and mismatches == 0
    report(7, ok, f"hat o hat breakpoints {f.nodes.tolist()} values {f.values.tolist()}; "
                  f"{mismatches}/100 render round-trip mismatches")
    assert ok
