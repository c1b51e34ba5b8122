"""Acceptance gate: one test per criterion, each at its stated tolerance.

A summary line per criterion is printed at the end of the run.
"""

import csv
import math
import statistics
import time

import numpy as np
import pytest

from conftest import make_pop
from coarse_personalization import (FeasibleTreatment, Individual, Population, SegmentedPolicy,
                                    SolverConfig, TreatmentSpace, foc_residual, grid_solve,
                                    refine_solve, solve, solve_granular, solve_path, speed_benchmark,
                                    surplus_decomposition, within_dimension_order_violations)
from coarse_personalization.bootstrap import bootstrap_second_step
from coarse_personalization.experiment import ExperimentSpec, run_experiment
from coarse_personalization.granular import optimal_treatment, optimal_treatment_numeric
from coarse_personalization.io import load_population, save_population
from coarse_personalization.methods import BENCHMARKS, method_fn
from coarse_personalization.synth import SynthConfig, generate_population

CRITERIA = [
    ("1", "closed-form optimum matches golden-section search"),
    ("2", "Lloyd matches grid and refinement oracles"),
    ("3", "L = N recovers the granular policy"),
    ("4", "warm-started profit is non-decreasing in L"),
    ("5", "averaged first-order condition holds per interior segment"),
    ("6", "same-dimension segments are contiguous in beta/s"),
    ("7", "coarse dominates every benchmark in every experiment cell"),
    ("8", "surplus identities and the one-dimensional worked example"),
    ("9", "rounding: ex-post never adds offers, finer ex-ante grid dominates"),
    ("10", "bootstrap sd = 0 on clones, emitted moments recompute"),
    ("11", "1.2M-row solve time and speed ratio over grid search"),
    ("12", "byte-identical report bundles across thread counts"),
]


@pytest.fixture(scope="module")
def experiment_bundles():
    """Two experiment cells (linked and unlinked covariates), each run with 1 and 4 threads."""
    specs = [
        ExperimentSpec(preset="small", n=800, seed=21, L_max=10, bootstrap=4, status_quo="2:10"),
        ExperimentSpec(preset="small", n=500, seed=22, L_max=10, starts=3, bootstrap=0),
    ]
    out = []
    for spec in specs:
        out.append((spec, run_experiment(spec, threads=1), run_experiment(spec, threads=4)))
    return out


def test_closed_form_vs_golden_section(record_criterion):
    rng = np.random.default_rng(2024)
    cases = []
    for _ in range(1000):
        ub = float(rng.uniform(0.5, 30.0))
        ind = Individual("r", (rng.normal(),), (float(np.exp(rng.normal(0.5, 1.0))),),
                         (float(np.exp(rng.normal(-0.5, 1.0))),))
        cases.append((ind, TreatmentSpace((ub,))))
    t0 = time.perf_counter()
    closed = [optimal_treatment(ind, 0, sp) for ind, sp in cases]
    elapsed = time.perf_counter() - t0
    numeric = [optimal_treatment_numeric(ind, 0, sp) for ind, sp in cases]
    worst = max(abs(a - b) for a, b in zip(closed, numeric))
    assert worst <= 1e-8
    assert elapsed < 1.0
    record_criterion("1", f"max |diff| = {worst:.2e}, closed form {elapsed * 1e3:.1f} ms")


def test_oracle_equivalence(record_criterion):
    t0 = time.perf_counter()
    worst_grid, worst_refine = math.inf, math.inf
    for k in range(20):
        rng = np.random.default_rng(100 + k)
        pop = make_pop(int(rng.integers(6, 31)), seed=100 + k)
        for L in (1, 2, 3):
            lloyd = solve(pop, SolverConfig(num_treatments=L, num_starts=10, seed=k)).report.total_profit
            grid = grid_solve(pop, L, 41)[1].total_profit
            ref = refine_solve(pop, L, seed=k)[1].total_profit
            assert lloyd >= grid - 1e-6, (k, L, lloyd, grid)
            assert lloyd >= ref - 0.01 * abs(ref), (k, L, lloyd, ref)
            worst_grid = min(worst_grid, lloyd - grid)
            worst_refine = min(worst_refine, (lloyd - ref) / abs(ref))
    elapsed = time.perf_counter() - t0
    assert elapsed < 30.0
    record_criterion("2", f"min(lloyd-grid) = {worst_grid:.2e}, "
                              f"min rel(lloyd-refine) = {worst_refine:.2e}, {elapsed:.1f} s")


def test_granular_recovery(record_criterion):
    pop = make_pop(1000, seed=7)
    res = solve(pop, SolverConfig(num_treatments=1000, num_starts=2))
    rbar = solve_granular(pop).best_return.sum()
    assert res.report.total_regret == 0.0
    assert abs(res.report.total_profit - rbar) <= 1e-9 * abs(rbar)
    record_criterion("3", f"regret = {res.report.total_regret}, profit/sum(Rbar) - 1 = "
                              f"{res.report.total_profit / rbar - 1:.1e}")


def test_monotone_in_L(record_criterion):
    worst = math.inf
    for seed in range(3):
        pop = make_pop(300, seed=40 + seed)
        path = solve_path(pop, 10, SolverConfig(seed=seed))
        profits = [r.report.total_profit for r in path]
        steps = np.diff(profits)
        assert np.all(steps >= -1e-9), profits
        worst = min(worst, steps.min())
    record_criterion("4", f"smallest step = {worst:.3e}")


def test_foc_residual(record_criterion):
    worst, interior = 0.0, 0
    for seed in range(10):
        pop = make_pop(400, seed=200 + seed)
        res = solve(pop, SolverConfig(num_treatments=1 + seed % 6, seed=seed))
        for r in foc_residual(pop, res.policy):
            if r.status == "interior":
                interior += 1
                worst = max(worst, r.residual)
    assert interior > 0
    assert worst <= 1e-6
    record_criterion("5", f"{interior} interior segments, max residual {worst:.1e}")


def test_quantization(record_criterion):
    total = 0
    for seed in range(20):
        pop = make_pop(300, seed=300 + seed)
        res = solve(pop, SolverConfig(num_treatments=2 + seed % 7, seed=seed))
        total += within_dimension_order_violations(pop, res.policy)
    assert total == 0
    record_criterion("6", "0 violations on 20 instances")


def test_dominance_chain(record_criterion, experiment_bundles):
    cells = 0
    for spec, bundle, _ in experiment_bundles:
        header, rows = bundle.tables["profit_vs_L.csv"]
        c = header.index("coarse_profit")
        for row in rows:
            for m in BENCHMARKS:
                assert row[c] >= row[header.index(f"{m}_profit")] - 1e-9, (spec.seed, row[0], m)
            cells += 1
        assert len(rows) == 10
    record_criterion("7", f"{cells} L-cells x {len(BENCHMARKS)} benchmarks")


def test_surplus(record_criterion, small_pop):
    res = solve(small_pop, SolverConfig(num_treatments=4))
    s = surplus_decomposition(small_pop, res.policy)
    assert np.array_equal(s.delta_ts, s.delta_cs + s.delta_ps)
    regret = solve_granular(small_pop).best_return - np.array(
        [small_pop.alpha[i, t.dim] + small_pop.beta[i, t.dim] * np.log1p(t.value)
         - small_pop.cost_scale[i, t.dim] * t.value
         for i, t in ((i, res.policy.treatments[a]) for i, a in enumerate(res.policy.assignment))])
    assert np.all(np.abs(s.delta_ps + regret) <= 1e-12)
    assert np.all(s.delta_ps <= 1e-12)
    assert s.overall.share_ps_positive == 0.0

    # one dimension, dollars off: beta = 3, s = 1, coarse level 1, optimum 2
    pop = Population(TreatmentSpace((5.0,), ("dollar",)), np.array(["a"]), [[0.0]], [[3.0]], [[1.0]])
    coarse = SegmentedPolicy.from_assignment([FeasibleTreatment(0, 1.0)], [0])
    ex = surplus_decomposition(pop, coarse)
    expected = 3.0 * math.log(2.0) - 3.0 * math.log(3.0)   # tau(1) - tau(2)
    assert abs(ex.delta_ts[0] - expected) <= 1e-9
    assert abs(ex.delta_ts[0] - (-1.21640)) <= 1e-5
    record_criterion("8", f"worked example dTS = {ex.delta_ts[0]:.6f}")


def test_rounding(record_criterion, experiment_bundles):
    checked = 0
    for spec, bundle, _ in experiment_bundles:
        header, rows = bundle.tables["rounding.csv"]
        assert header == ["L", "mode", "step", "profit", "ratio", "effective_treatments"]
        ante = {(r[0], r[2]): r[3] for r in rows if r[1] == "ex-ante"}
        for r in rows:
            if r[1] == "ex-post":
                assert r[5] <= r[0]
        for L in range(1, 11):
            assert ante[(L, 0.25)] >= ante[(L, 1.0)] - 1e-9
            checked += 1
    record_criterion("9", f"{checked} L-cells")


def test_bootstrap(record_criterion, experiment_bundles, tmp_path):
    clones = Population(TreatmentSpace((5.0, 20.0)), np.array([f"c{i}" for i in range(50)]),
                        np.zeros((50, 2)), np.tile([2.0, 1.0], (50, 1)), np.tile([1.0, 0.2], (50, 1)))
    res = bootstrap_second_step(clones, 20, method_fn("coarse", 2), seed=5)
    assert res.sd == 0.0

    spec, bundle, _ = experiment_bundles[0]
    bundle.write(tmp_path)
    with open(tmp_path / "bootstrap.csv") as fh:
        reps = list(csv.DictReader(fh))
    with open(tmp_path / "bootstrap_summary.csv") as fh:
        summary = list(csv.DictReader(fh))
    assert summary
    for row in summary:
        vals = [float(r["profit"]) for r in reps if r["method"] == row["method"] and r["L"] == row["L"]]
        assert len(vals) == int(row["B"])
        assert math.isclose(statistics.mean(vals), float(row["mean"]), rel_tol=1e-12, abs_tol=1e-12)
        assert math.isclose(statistics.stdev(vals), float(row["sd"]), rel_tol=1e-12, abs_tol=1e-12)
    record_criterion("10", f"{len(summary)} summaries recomputed")


@pytest.mark.slow
def test_performance(record_criterion, tmp_path):
    pop = generate_population(SynthConfig(seed=3, n=1_200_000, covariates="none"))
    path = tmp_path / "big.csv"
    save_population(pop, path)
    t0 = time.perf_counter()
    loaded = load_population(path)
    t1 = time.perf_counter()
    res = solve(loaded, SolverConfig(num_treatments=5))
    t2 = time.perf_counter()
    assert len(loaded) == 1_200_000 and res.policy.num_treatments == 5
    assert t2 - t1 < 60.0
    assert t2 - t0 < 60.0

    speed = speed_benchmark(generate_population(SynthConfig(seed=5, n=100_000, covariates="none")), 5, 10)
    assert speed.ratio >= 5.0
    record_criterion("11", f"load {t1 - t0:.1f} s + solve {t2 - t1:.1f} s; "
                               f"Lloyd {speed.lloyd_seconds:.1f} s vs grid {speed.grid_seconds:.1f} s "
                               f"(ratio {speed.ratio:.1f})")


def test_determinism(record_criterion, experiment_bundles, tmp_path):
    for k, (spec, b1, b4) in enumerate(experiment_bundles):
        r1, r4 = b1.render(), b4.render()
        assert r1 == r4
        again = run_experiment(spec, threads=1).render()
        assert again == r1
        d1, d4 = tmp_path / f"t1_{k}", tmp_path / f"t4_{k}"
        b1.write(d1)
        b4.write(d4)
        for name in r1:
            assert (d1 / name).read_bytes() == (d4 / name).read_bytes()
    record_criterion("12", f"{len(experiment_bundles)} specs, {len(r1)} files each")
