"""Acceptance suite: one test per criterion, at the stated sizes and tolerances.

Each test records a PASS/FAIL line; the lines are printed together at the end
of the session (see conftest.py). Criteria that cannot be met at these sizes
are kept at full strength and marked as strict expected failures; the
measured numbers are in the decisions ledger.
"""

import time

import numpy as np
import pytest

from rmtlab.cli.config import validate_config
from rmtlab.cli.runner import run
from rmtlab.emf.experiments import algebra_suite, l2_decay_experiment, replacement_check
from rmtlab.emf.flow import TrajectorySource, finite_speed_probe
from rmtlab.emf.kernels import KernelSpec, bulk_set
from rmtlab.emf.lattice import StateSpace
from rmtlab.matchings import Configuration, MatchingSum, double_factorial, enumerate_matchings, multigraph_sum

pytestmark = pytest.mark.slow

REPORT: dict = {}


def report(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    REPORT[number] = line
    print(line)


def records(result, statistic):
    return [r for r in result.records if r.statistic == statistic]


def one(result, statistic):
    (r,) = records(result, statistic)
    return r


# 1 ---------------------------------------------------------------------------------

def test_criterion_01_exact_identities():
    t0 = time.perf_counter()
    gaps = []
    for N, M in ((8, 5), (64, 2)):
        res = run(validate_config(f"kind: identities\nN: {N}\nsamples: {M}\ncycle: true\n"))
        gaps += [r.value for r in res.records]
        assert {r.statistic for r in res.records} == {"qGq", "one_index", "two_index", "cycle"}
    elapsed = time.perf_counter() - t0
    ok = max(gaps) <= 1e-10 and elapsed < 5.0
    report(1, ok, f"{len(gaps)} checks, worst gap {max(gaps):.2e} (<= 1e-10), {elapsed:.2f} s (< 5 s)")
    assert max(gaps) <= 1e-10
    assert elapsed < 5.0


# 2 ---------------------------------------------------------------------------------

def test_criterion_02_matching_combinatorics():
    t0 = time.perf_counter()
    counts_ok = all(len(enumerate_matchings(Configuration(((0, n),)))) == double_factorial(2 * n - 1)
                    for n in range(1, 7))
    rng = np.random.default_rng(2)
    closed = 0.0
    for _ in range(20):
        X = rng.standard_normal((4, 4))
        p = X + X.T
        i, j, k = 0, 1, 3
        two = MatchingSum(Configuration.from_sites([i, j]))(p) - (p[i, i] * p[j, j] + 2 * p[i, j] ** 2)
        three = MatchingSum(Configuration.from_sites([i, j, k]))(p) - (
            p[i, i] * p[j, j] * p[k, k]
            + 2 * (p[i, j] ** 2 * p[k, k] + p[j, k] ** 2 * p[i, i] + p[i, k] ** 2 * p[j, j])
            + 8 * p[i, j] * p[j, k] * p[k, i])
        closed = max(closed, abs(two), abs(three))
    worst = 0.0
    for n in range(1, 6):
        ms = MatchingSum(Configuration.from_sites(range(n)))
        for _ in range(100):
            X = rng.standard_normal((n, n))
            p = (X + X.T) / 2
            b = ms(p)
            worst = max(worst, abs(multigraph_sum(range(n), p) - b) / max(1.0, abs(b)))
    elapsed = time.perf_counter() - t0
    ok = counts_ok and closed <= 1e-12 and worst <= 1e-12 and elapsed < 30
    report(2, ok, f"counts (2n-1)!! for n<=6: {counts_ok}; closed forms {closed:.1e}; "
                  f"multigraph vs enumeration {worst:.1e} (<= 1e-12); {elapsed:.1f} s")
    assert counts_ok
    assert closed <= 1e-12
    assert worst <= 1e-12
    assert elapsed < 30


# 3 ---------------------------------------------------------------------------------

def test_criterion_03_clt():
    tol = (0.07, 0.10, 0.25, 0.45)
    lines, ok = [], True
    for beta in (1, 2):
        res = run(validate_config(f"kind: clt\nN: 512\nsamples: 2000\nbeta: {beta}\n"))
        ms = [one(res, f"m{n}") for n in range(1, 5)]
        ok &= all(abs(m.value - m.param) <= t for m, t in zip(ms, tol))
        lines.append(f"beta={beta}: " + ", ".join(f"{m.value:+.3f}" for m in ms))
    report(3, ok, "moments m1..m4 " + "; ".join(lines) + " vs (0, 1, 0, 3) +- (0.07, 0.10, 0.25, 0.45)")
    assert ok


# 4 ---------------------------------------------------------------------------------

def test_criterion_04_generator_algebra():
    t0 = time.perf_counter()
    worst = 0.0
    for N, n in ((8, 1), (8, 2), (16, 1), (16, 2)):
        res = algebra_suite(N=N, n=n, ell=3, eta=0.3, trials=20, seed=N + n)
        worst = max(worst, max(res.values()))
    rep = replacement_check(N=16, n=2, samples=1000, seed=4)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and rep.both_hold and elapsed < 60
    report(4, ok, f"worst algebra residual {worst:.1e} (<= 1e-12); replacement on 1000 h holds={rep.both_hold} "
                  f"(ratios in [{rep.min_ratio:.2f}, {rep.max_ratio:.2f}], sharp C {rep.sharp_constant:.2f}); "
                  f"{elapsed:.1f} s")
    assert worst <= 1e-12
    assert rep.both_hold
    assert elapsed < 60


# 5 ---------------------------------------------------------------------------------

def test_criterion_05_finite_speed():
    t0 = time.perf_counter()
    N, ell = 60, 4
    space = StateSpace.full(N, 1)
    y = (N // 2,)
    spec = KernelSpec("short", ell=ell, J=bulk_set(N, 0.2))
    fs = finite_speed_probe(space, y, y, spec, 0.0, ell / N, TrajectorySource.frozen_quantiles(N), far=20)
    elapsed = time.perf_counter() - t0
    ok = fs.far_mass <= 1e-6 and elapsed < 30
    report(5, ok, f"mass beyond distance 20 at t = l/N: {fs.far_mass:.2e} (<= 1e-6); {elapsed:.2f} s")
    assert fs.far_mass <= 1e-6
    assert elapsed < 30


# 6 ---------------------------------------------------------------------------------

def test_criterion_06_l2_decay():
    t0 = time.perf_counter()
    rep = l2_decay_experiment(N=200, n=2, K=14, ell=5, seed=0)
    elapsed = time.perf_counter() - t0
    ok = rep.strictly_decreasing and rep.endpoint_ratio <= 1.0 and elapsed < 300
    report(6, ok, f"||h_t||_2 strictly decreasing: {rep.strictly_decreasing}; endpoint / envelope "
                  f"{rep.endpoint_ratio:.3f} (<= 1); {len(rep.norms)} recorded times; {elapsed:.0f} s")
    assert rep.strictly_decreasing
    assert rep.endpoint_ratio <= 1.0
    assert elapsed < 300


# 7 ---------------------------------------------------------------------------------

def test_criterion_07_relaxation():
    parts, ok = [], True
    for n, N, M, tol in ((2, 512, 2000, 0.1), (3, 256, 1000, 0.15)):
        res = run(validate_config(f"kind: emf-relax\nN: {N}\nn: {n}\nsamples: {M}\ntol: {tol}\n"))
        gaps = records(res, "f_gap")
        worst = max(r.value for r in gaps)
        ok &= worst <= tol
        parts.append(f"n={n}, N={N}: sup gap {worst:.3f} (<= {tol})")
    report(7, ok, "; ".join(parts))
    assert ok


# 8 ---------------------------------------------------------------------------------

def test_criterion_08_local_laws():
    res = run(validate_config("kind: locallaw\n"))
    two = one(res, "two_g_pass_rate").value
    chain = one(res, "chain_pass_rate").value
    c2 = one(res, "two_g_control_min_ratio").value
    c3 = one(res, "chain_control_min_ratio").value
    ok = two >= 0.96 and chain >= 0.96 and c2 > 1 and c3 > 1
    report(8, ok, f"two-G {two * 50:.0f}/50, k=3 chain {chain * 50:.0f}/50 (>= 48); A=I controls exceed the "
                  f"bounds by >= {c2:.1f}x and {c3:.1f}x")
    assert two >= 0.96 and chain >= 0.96
    assert c2 > 1 and c3 > 1


# 9 ---------------------------------------------------------------------------------

@pytest.mark.xfail(strict=True, reason="rigidity gauge is 5-11 against N^0.15 = 2.83 at N=1024; "
                                       "blocking analysis in the decisions ledger")
def test_criterion_09_rigidity():
    t0 = time.perf_counter()
    res = run(validate_config("kind: rigidity\nN: 1024\nsamples: 50\n"))
    elapsed = time.perf_counter() - t0
    g = np.array([r.value for r in records(res, "gauge")])
    bound = 1024 ** 0.15
    n_ok = int(np.sum(g <= bound))
    ok = n_ok >= 48 and elapsed < 120
    report(9, ok, f"{n_ok}/50 gauges <= N^0.15 = {bound:.2f} (need 48); median {np.median(g):.2f}, "
                  f"range [{g.min():.2f}, {g.max():.2f}]; {elapsed:.0f} s")
    assert n_ok >= 48
    assert elapsed < 120


# 10 --------------------------------------------------------------------------------

def test_criterion_10_gft():
    res = run(validate_config("kind: dbm-gft\n"))
    r = one(res, "gft_delta")
    bound = 3 * r.error + r.param
    report(10, bool(r.passed), f"|Delta| = {r.value:.4f}, 3 SE + N^-0.05 = {bound:.4f} (SE {r.error:.4f})")
    assert r.value <= bound


# 11 --------------------------------------------------------------------------------

@pytest.mark.xfail(strict=True, reason="max overlap is 0.145-0.174 against N^-0.3 = 0.125 at N=1024; "
                                       "blocking analysis in the decisions ledger")
def test_criterion_11_eth():
    res = run(validate_config("kind: eth\nN: 1024\nsamples: 20\nsweep: [256, 1024]\n"))
    vals = np.array([r.value for r in records(res, "max_overlap")])
    bound = 1024 ** -0.3
    n_ok = int(np.sum(vals <= bound))
    meds = [r.value for r in records(res, "median_max_overlap")]
    decreasing = bool(one(res, "median_decreasing").passed)
    ok = n_ok == 20 and decreasing
    report(11, ok, f"{n_ok}/20 max |p_ij| <= N^-0.3 = {bound:.3f} (need 20), observed "
                   f"[{vals.min():.3f}, {vals.max():.3f}]; median N=256 -> 1024: {meds[0]:.3f} -> {meds[1]:.3f} "
                   f"(decreasing: {decreasing})")
    assert decreasing
    assert n_ok == 20
