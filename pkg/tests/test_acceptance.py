"""Acceptance gate: one test group per criterion, summarised at the end of the run.

Each check records its outcome and prints a pass/fail line; the terminal
summary repeats one line per criterion.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from ribotide import cli
from ribotide.analytic import lambert_w0, limit_exit_flow, phi, phi_inverse, rho_star
from ribotide.core import ModelParams, UorfGeometry
from ribotide.dynamic import relax
from ribotide.experiments import figure4_convergence
from ribotide.parallel import map_ordered
from ribotide.stationary import coupled_iteration, solve_stationary
from ribotide.tasep import point_seed, simulate

GOLDEN = Path(__file__).parent / "golden" / "exit_flow.csv"
FIG3 = UorfGeometry(100, 200, 100)
FIG3_C = (0.025, 0.035, 0.05, 0.1, 0.2, 0.3)

_results = {}


def record(criterion, part, ok, detail):
    _results.setdefault(criterion, {})[part] = (bool(ok), detail)
    print(f"criterion {criterion}{part}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, detail


def summary_lines():
    out = []
    for crit in sorted(_results):
        parts = _results[crit]
        ok = all(p[0] for p in parts.values())
        detail = "; ".join(
            f"{name + ': ' if name else ''}{'pass' if p[0] else 'FAIL'} {p[1]}" for name, p in sorted(parts.items())
        )
        out.append(f"criterion {crit}: {'PASS' if ok else 'FAIL'} [{detail}]")
    return out


# ---------------------------------------------------------------- 1


def test_criterion_1_lambert_and_phi():
    xs = np.concatenate([-np.exp(-1) * (1 - np.logspace(-15, 0, 500)), np.logspace(-12, 3, 500)])
    worst_w = max(abs(lambert_w0(x) * math.exp(lambert_w0(x)) - x) / max(1.0, abs(x)) for x in xs)
    rhos = np.linspace(0.0, 0.5, 5001)
    worst_phi = max(abs(phi_inverse(phi(r)) - r) for r in rhos)
    worst_rho = max(abs(rho_star(r, 0.0, c0) - r) for r in np.arange(1, 10) * 0.05 for c0 in (1.0, 20.0, 40.0))
    ok = worst_w <= 1e-12 and worst_phi <= 1e-12 and worst_rho <= 1e-12
    record(1, "", ok, f"W residual {worst_w:.1e}, phi round trip {worst_phi:.1e}, rho_star(tau=0) {worst_rho:.1e}")


# ---------------------------------------------------------------- 2


def test_criterion_2_peak_formula():
    grid = np.arange(1, 5000) * 1e-4
    misses = []
    for c0 in (5, 10, 20, 40):
        f = [limit_exit_flow(r, c0) for r in grid]
        misses.append(abs(grid[int(np.argmax(f))] - 1 / (2 + c0)))
    record(2, "", max(misses) <= 1e-4, f"max |argmax - 1/(2+c0)| = {max(misses):.2e}")


# ---------------------------------------------------------------- 3


def test_criterion_3_random_instances():
    rng = np.random.default_rng(20240601)
    t0 = time.perf_counter()
    bad = []
    for _ in range(50):
        rho0 = 0.5 * (1.0 - rng.random())  # (0, 0.5]
        c = 0.3 * (1.0 - rng.random())  # (0, 0.3]
        g = UorfGeometry(int(rng.integers(10, 151)), int(rng.integers(50, 401)), int(rng.integers(10, 151)))
        sol = solve_stationary(ModelParams(rho0, c), g)
        problems = sol.violations(tol=1e-9)
        if problems:
            bad.append((rho0, c, g, problems))
    elapsed = time.perf_counter() - t0
    record(3, "", not bad and elapsed <= 60, f"{50 - len(bad)}/50 valid in {elapsed:.1f} s")


# ---------------------------------------------------------------- 4


def test_criterion_4_shooting_vs_relaxation():
    items = [(r, c) for c in FIG3_C for r in np.arange(1, 11) * 0.05]

    def gap(item):
        p = ModelParams(*item)
        return abs(solve_stationary(p, FIG3).j3 - relax(p, FIG3)[1])

    gaps = map_ordered(gap, items)
    record(4, "", max(gaps) <= 1e-6, f"max |j3 shooting - j3 relaxation| = {max(gaps):.2e} over {len(items)} points")


# ---------------------------------------------------------------- 5


def test_criterion_5_convergence_rate():
    rep = figure4_convergence(c0=20.0, n2_list=(50, 100, 200, 400, 800), rho0_grid=np.arange(1, 91) * 0.005)
    errs = rep.sup_errors
    monotone = all(b < a for a, b in zip(errs, errs[1:]))
    ratios = rep.rate_ratios()
    band = ratios.max() / ratios.min()
    record(5, "", monotone and band <= 3.0,
           f"sup errors {', '.join(f'{e:.2e}' for e in errs)}; ratio band {band:.2f}")


# ---------------------------------------------------------------- 6


@pytest.fixture(scope="module")
def saturated():
    return {r: relax(ModelParams(r, 0.025), FIG3) for r in (0.5, 0.7, 0.9)}


def test_criterion_6a_saturated_exit_flow(saturated):
    flows = [j for _, j in saturated.values()]
    spread = max(flows) - min(flows)
    record(6, "a", spread <= 1e-4, f"exit flow spread {spread:.2e}")


def test_criterion_6b_upstream_flow_is_quarter(saturated):
    prof, _ = saturated[0.9]
    upstream = prof.scanning_flows()[: FIG3.n1]
    dev = float(np.max(np.abs(upstream - 0.25)))
    record(6, "b", dev <= 1e-4, f"upstream flow {upstream.mean():.6f}, max |f - 1/4| = {dev:.2e}")


# ---------------------------------------------------------------- 7


SEED7 = 7
SWEEPS7 = 100_000


def _tasep_pair():
    g = FIG3
    return map_ordered(
        lambda k: simulate(ModelParams((0.08, 0.5)[k], 0.1), g, point_seed(SEED7, k), sample_sweeps=SWEEPS7),
        range(2),
    )


@pytest.fixture(scope="module")
def tasep_runs():
    t0 = time.perf_counter()
    first = _tasep_pair()
    second = _tasep_pair()
    return first, second, time.perf_counter() - t0


def test_criterion_7a_interior_peak(tasep_runs):
    (low, half), _, _ = tasep_runs
    pooled = math.hypot(low.se_j3, half.se_j3)
    diff = low.j3_hat - half.j3_hat
    record(7, "a", diff > 3 * pooled,
           f"j3(0.08) = {low.j3_hat:.5f}, j3(0.5) = {half.j3_hat:.5f}, diff / pooled se = {diff / pooled:.1f}")


def test_criterion_7b_ledger(tasep_runs):
    first, _, _ = tasep_runs
    res = [(r.stats.ledger_residual(), r.stats.elongating_residual()) for r in first]
    record(7, "b", all(a == 0 and b == 0 for a, b in res), f"ledger residuals {res}")


def test_criterion_7c_determinism(tasep_runs):
    first, second, elapsed = tasep_runs
    same = all(
        a.j3_hat == b.j3_hat and a.se_j3 == b.se_j3
        and np.array_equal(a.stats.site_occupancy_s, b.stats.site_occupancy_s)
        and np.array_equal(a.stats.site_occupancy_e, b.stats.site_occupancy_e)
        and np.array_equal(a.final_state, b.final_state)
        for a, b in zip(first, second)
    )
    record(7, "c", same and elapsed <= 600, f"repeat identical: {same}, {elapsed:.1f} s for both runs")


# ---------------------------------------------------------------- 8


def test_criterion_8_boundary_layer():
    offsets = []
    for n2 in (100, 200, 400, 800):
        g = UorfGeometry(100, n2, 0)
        sol = solve_stationary(ModelParams.scaled(0.3, 20.0, g), g)
        half = rho_star(0.3, 1.0, 20.0) / 2
        m = int(np.argmax(sol.rho2 < half))
        offsets.append((n2, n2 - m, 8 * math.log(n2)))
    ok = all(0 <= d <= bound for _, d, bound in offsets)
    record(8, "", ok, ", ".join(f"N2={n}: {d} sites" for n, d, _ in offsets))


# ---------------------------------------------------------------- 9


def test_criterion_9_monotone_comparison():
    rng = np.random.default_rng(99)
    checked = violations = 0
    for _ in range(1000):
        n = int(rng.integers(1, 21))
        r = rng.uniform(0, 0.05, n)
        d = rng.uniform(0, 0.05, n)
        r_hat, d_hat = r * rng.random(n), d * rng.random(n)
        rho0 = rng.uniform(0.05, 0.95)
        j0 = rng.uniform(0.001, 0.3)
        a, ja = coupled_iteration(j0, rho0, r, d, n)
        b, jb = coupled_iteration(j0 + rng.uniform(0, 0.05), rho0 * rng.uniform(0.5, 1.0), r_hat, d_hat, n)
        k = min(a.survived, b.survived)
        if k < 1:
            continue
        m = min(len(ja), len(jb), k + 1)
        checked += 1
        if np.any(b.values[: k + 1] > a.values[: k + 1]) or np.any(jb[:m] < ja[:m]):
            violations += 1
    record(9, "", violations == 0 and checked > 0, f"{checked} comparable instances, {violations} violations")


# ---------------------------------------------------------------- 10


GOLDEN_ARGS = ["sweep", "--n1", "10", "--n2", "20", "--n3", "10", "--rho0", "0.1", "0.3", "0.5", "0.7",
               "--c", "0.05", "0.2", "--sweeps", "2000", "--seed", "7"]


def test_criterion_10_cli_golden(tmp_path):
    blobs = {}
    for label, threads in (("a", "1"), ("b", "1"), ("c", "8")):
        out = tmp_path / label
        assert cli.main(GOLDEN_ARGS + ["--threads", threads, "--output-dir", str(out)]) == 0
        blobs[label] = (out / "exit_flow.csv").read_bytes()
    golden = GOLDEN.read_bytes() if GOLDEN.exists() else b""
    ok = blobs["a"] == blobs["b"] == blobs["c"] == golden
    record(10, "", ok, f"two runs identical: {blobs['a'] == blobs['b']}, threads 1 vs 8 identical: "
                       f"{blobs['a'] == blobs['c']}, matches golden file: {blobs['a'] == golden}")
