"""Brute-force references for the coarse personalization solver.

``grid_solve`` enumerates every L-subset of a discretized treatment grid.
``refine_solve`` enumerates the multisets of treatment dimensions and, for
each, alternates assignment with closed-form level updates from several
seeds (including the best grid menu of that composition).
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass

import numpy as np

from .benchmarks import best_subset
from .errors import ConfigurationError, EnumerationCapError
from .granular import optimal_level, solve_granular
from .model import FeasibleTreatment, Population, SegmentedPolicy, policy_profit, profit_matrix


def treatment_grid(pop: Population, points_per_dim: int, include_zero: bool = False):
    """``points_per_dim`` equally spaced levels per dimension, upper bound included."""
    if points_per_dim < 1:
        raise ConfigurationError("points_per_dim must be at least 1")
    grid = []
    for d, ub in enumerate(pop.space.upper_bounds):
        if include_zero:
            levels = np.linspace(0.0, ub, points_per_dim) if points_per_dim > 1 else np.array([ub])
        else:
            levels = ub * np.arange(1, points_per_dim + 1) / points_per_dim
        grid.extend(FeasibleTreatment(d, float(v)) for v in levels)
    return grid


def grid_solve(pop: Population, L: int, points_per_dim: int, include_zero: bool = False,
               cap: int = 10**7):
    """Exact optimum over L-subsets of the grid. Returns ``(policy, report)``."""
    grid = treatment_grid(pop, points_per_dim, include_zero)
    if L > len(grid):
        raise ConfigurationError(f"L={L} exceeds the {len(grid)} grid treatments")
    count = math.comb(len(grid), L)
    if count > cap:
        raise EnumerationCapError(count, cap)
    P = profit_matrix(pop, grid)
    combo, _ = best_subset(P, L, cap)
    offered = [grid[j] for j in combo]
    labels = np.argmax(P[:, list(combo)], axis=1)
    policy = SegmentedPolicy.from_assignment(
        offered, labels, {"method": "grid", "points_per_dim": points_per_dim, "subsets": count})
    return policy, policy_profit(pop, policy)


def dimension_compositions(dims: int, L: int) -> list[tuple[int, ...]]:
    """Multisets of L treatment dimensions drawn from ``dims``."""
    return list(itertools.combinations_with_replacement(range(dims), L))


def _refine(pop: Population, dims: np.ndarray, values: np.ndarray, max_iter: int = 500):
    """Alternate assignment and per-segment closed-form levels, dimensions fixed."""
    values = values.astype(float).copy()
    labels = None
    for _ in range(max_iter):
        P = profit_matrix(pop, [FeasibleTreatment(int(d), v) for d, v in zip(dims, values)])
        new = np.argmax(P, axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for l, d in enumerate(dims):
            rows = labels == l
            if rows.any():
                values[l] = optimal_level(pop.beta[rows, d].sum(), pop.cost_scale[rows, d].sum(),
                                          pop.space.upper_bounds[d])
    P = profit_matrix(pop, [FeasibleTreatment(int(d), v) for d, v in zip(dims, values)])
    labels = np.argmax(P, axis=1)
    return float(P[np.arange(len(pop)), labels].sum()), values, labels


def _grid_seed(pop: Population, comp: tuple[int, ...], points: int, budget: int):
    """Best grid menu whose dimensions match ``comp``, or None if too many."""
    per_dim = {d: comp.count(d) for d in set(comp)}
    total = math.prod(math.comb(points, k) for k in per_dim.values())
    if total > budget:
        return None
    cols, index = [], {}
    for d in sorted(per_dim):
        ub = pop.space.upper_bounds[d]
        for g in range(points):
            index[(d, g)] = len(cols)
            cols.append(FeasibleTreatment(d, ub * (g + 1) / points))
    P = np.ascontiguousarray(profit_matrix(pop, cols).T)
    choices = [list(itertools.combinations(range(points), per_dim[d])) for d in sorted(per_dim)]
    best_total, best_menu = -np.inf, None
    for parts in itertools.product(*choices):
        menu = [index[(d, g)] for d, part in zip(sorted(per_dim), parts) for g in part]
        total_profit = P[menu].max(axis=0).sum()
        if total_profit > best_total:
            best_total, best_menu = total_profit, menu
    dims = np.array([cols[j].dim for j in best_menu])
    values = np.array([cols[j].value for j in best_menu])
    return dims, values


def refine_solve(pop: Population, L: int, grid_points: int = 21, restarts: int = 3,
                 seed: int = 0, composition_cap: int = 10_000, seed_budget: int = 50_000):
    """Continuous optimum by exhaustive dimension compositions. Returns ``(policy, report)``."""
    if L < 1 or L > len(pop):
        raise ConfigurationError(f"L={L} must be in 1..{len(pop)}")
    comps = dimension_compositions(pop.dims, L)
    if len(comps) > composition_cap:
        raise EnumerationCapError(len(comps), composition_cap)
    rng = np.random.default_rng(seed)
    levels = solve_granular(pop).levels
    best = (-np.inf, None, None, None)
    for comp in comps:
        dims = np.array(comp)
        starts = []
        gs = _grid_seed(pop, comp, grid_points, seed_budget)
        if gs is not None:
            starts.append(gs[1][np.argsort(gs[0], kind="stable")])
        # spread each dimension's offers over quantiles of the optimal levels
        q = np.empty(L)
        for d in set(comp):
            slots = np.flatnonzero(dims == d)
            q[slots] = np.quantile(levels[:, d], (np.arange(len(slots)) + 0.5) / len(slots))
        starts.append(q)
        bounds = pop.space.bounds[dims]
        starts.extend(rng.uniform(0.0, bounds) for _ in range(restarts))
        for values in starts:
            profit, vals, labels = _refine(pop, dims, values)
            if profit > best[0]:
                best = (profit, dims, vals, labels)
    _, dims, vals, labels = best
    offered = [FeasibleTreatment(int(d), float(v)) for d, v in zip(dims, vals)]
    policy = SegmentedPolicy.from_assignment(offered, labels,
                                             {"method": "refine", "compositions": len(comps)})
    return policy, policy_profit(pop, policy)


@dataclass(frozen=True)
class SpeedResult:
    lloyd_seconds: float
    grid_seconds: float
    lloyd_profit: float
    grid_profit: float
    config: dict

    @property
    def ratio(self) -> float:
        return self.grid_seconds / self.lloyd_seconds if self.lloyd_seconds > 0 else math.inf


def speed_benchmark(pop: Population, L: int, points_per_dim: int, config=None) -> SpeedResult:
    """Wall-clock comparison of the Lloyd solver and the grid search on one population."""
    from .lloyd import SolverConfig, solve
    config = (config or SolverConfig()).replace(num_treatments=L)
    t0 = time.perf_counter()
    res = solve(pop, config)
    t1 = time.perf_counter()
    _, grid_report = grid_solve(pop, L, points_per_dim)
    t2 = time.perf_counter()
    return SpeedResult(t1 - t0, t2 - t1, res.report.total_profit, grid_report.total_profit,
                       {"N": len(pop), "D": pop.dims, "L": L, "G": points_per_dim,
                        "solver": config.as_dict()})
