"""Fully granular personalization: each individual gets her own optimum.

For the log response with linear cost the per-dimension optimum has the
closed form ``clip(beta / s - 1, 0, t_max)`` (first-order condition
``beta / (1 + t) = s``). The same formula applied to summed parameters gives
the optimum of a whole segment, which the solver and the benchmarks reuse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (FeasibleTreatment, Individual, Population, ProfitReport,
                    SegmentedPolicy, TreatmentSpace, incremental_profit,
                    policy_profit)

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True, eq=False)
class GranularSolution:
    levels: np.ndarray       # (N, D) optimal level per dimension
    profits: np.ndarray      # (N, D) profit at those levels
    best_dim: np.ndarray     # (N,)
    best_return: np.ndarray  # (N,)

    @property
    def best_level(self) -> np.ndarray:
        return self.levels[np.arange(len(self.best_dim)), self.best_dim]

    @property
    def total(self) -> float:
        return float(self.best_return.sum())

    def treatment(self, i: int) -> FeasibleTreatment:
        d = int(self.best_dim[i])
        return FeasibleTreatment(d, self.levels[i, d])


def optimal_level(beta, cost_scale, upper_bound):
    """Closed-form maximizer of ``beta*log(1+t) - s*t`` on ``[0, upper_bound]``.

    Works elementwise, and on segment sums (sum of beta, sum of s).
    """
    return np.clip(np.asarray(beta) / np.asarray(cost_scale) - 1.0, 0.0, upper_bound)


def solve_granular(pop: Population) -> GranularSolution:
    levels = optimal_level(pop.beta, pop.cost_scale, pop.space.bounds)
    profits = pop.alpha + pop.beta * np.log1p(levels) - pop.cost_scale * levels
    best_dim = np.argmax(profits, axis=1)
    best = profits[np.arange(len(pop)), best_dim]
    return GranularSolution(levels, profits, best_dim, best)


def _upper(ind: Individual, dim: int, space: TreatmentSpace | None) -> float:
    return math.inf if space is None else space.upper_bounds[dim]


def optimal_treatment(ind: Individual, dim: int, space: TreatmentSpace | None = None) -> float:
    return float(optimal_level(ind.beta[dim], ind.cost_scale[dim], _upper(ind, dim, space)))


def golden_section_max(f, lo: float, hi: float, tol: float = 1e-10, gain=None,
                       max_iter: int = 500) -> float:
    """Maximize a unimodal ``f`` on ``[lo, hi]``.

    ``gain(a, b)``, if given, must return ``f(b) - f(a)`` without catastrophic
    cancellation; near a flat maximum the raw difference of ``f`` values
    cannot resolve the argmax better than about ``sqrt(eps)``.
    """
    if gain is None:
        def gain(a, b):
            return f(b) - f(a)
    a, b = lo, hi
    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if gain(x1, x2) > 0:
            a, x1 = x1, x2
            x2 = a + INV_PHI * (b - a)
        else:
            b, x2 = x2, x1
            x1 = b - INV_PHI * (b - a)
    mid = 0.5 * (a + b)
    # boundary maxima: the bracket collapses onto the endpoint anyway, but
    # compare explicitly so an endpoint optimum is returned exactly
    best = mid
    for edge in (lo, hi):
        if gain(best, edge) >= 0 and abs(edge - mid) <= tol:
            best = edge
    return best


def optimal_treatment_numeric(ind: Individual, dim: int, space: TreatmentSpace | None = None,
                              tol: float = 1e-10, upper: float | None = None) -> float:
    """Golden-section search for the profit-maximizing level."""
    hi = upper if upper is not None else _upper(ind, dim, space)
    if not math.isfinite(hi):
        # log response: the maximizer never exceeds beta/s
        hi = max(ind.beta[dim] / ind.cost_scale[dim], 1.0)
    beta, s = ind.beta[dim], ind.cost_scale[dim]

    def gain(x, y):
        return beta * math.log1p((y - x) / (1.0 + x)) - s * (y - x)

    return golden_section_max(lambda t: incremental_profit(ind, dim, t), 0.0, hi, tol, gain)


def best_return(ind: Individual, space: TreatmentSpace | None = None) -> tuple[float, int]:
    """Highest achievable profit over dimensions, ties to the lower dimension."""
    best, best_d = -math.inf, 0
    for d in range(ind.dims):
        p = incremental_profit(ind, d, optimal_treatment(ind, d, space))
        if p > best:
            best, best_d = p, d
    return best, best_d


def regret(ind: Individual, treatment: FeasibleTreatment, space: TreatmentSpace | None = None) -> float:
    top, _ = best_return(ind, space)
    return max(top - incremental_profit(ind, treatment.dim, treatment.value, space), 0.0)


def round_significant(x, digits: int = 3):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    nz = x != 0
    mag = np.floor(np.log10(np.abs(x[nz])))
    scale = 10.0 ** (digits - 1 - mag)
    out[nz] = np.round(x[nz] * scale) / scale
    return out


def granular_policy(pop: Population, sig_digits: int = 3):
    """Every individual as her own segment.

    Returns ``(policy, report, unique_count)`` where ``unique_count`` is the
    number of distinct offers after rounding levels to ``sig_digits``
    significant figures.
    """
    sol = solve_granular(pop)
    treatments = tuple(sol.treatment(i) for i in range(len(pop)))
    policy = SegmentedPolicy.from_assignment(treatments, np.arange(len(pop)))
    report = policy_profit(pop, policy, sol.best_return)
    rounded = round_significant(sol.best_level, sig_digits)
    unique = len(set(zip(sol.best_dim.tolist(), rounded.tolist())))
    return policy, report, unique


# ---- segment-level closed forms ------------------------------------------

@dataclass(frozen=True, eq=False)
class CellSums:
    """Per-cell sums of alpha, beta and cost scale, each ``(K, D)``.

    Total profit of cell k at level t in dimension d is
    ``alpha[k, d] + beta[k, d] * log(1 + t) - cost[k, d] * t``.
    """

    alpha: np.ndarray
    beta: np.ndarray
    cost: np.ndarray
    counts: np.ndarray

    def profit(self, levels: np.ndarray) -> np.ndarray:
        """Cell profit at a ``(K, D)`` matrix of levels."""
        return self.alpha + self.beta * np.log1p(levels) - self.cost * levels

    def optimal_levels(self, bounds) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            lv = optimal_level(self.beta, self.cost, bounds)
        return np.where(self.counts[:, None] > 0, lv, 0.0)


def cell_sums(pop: Population, labels: np.ndarray, k: int) -> CellSums:
    labels = np.asarray(labels)
    keep = labels >= 0
    full = bool(keep.all())
    lab = labels if full else labels[keep]

    def sums(cols):
        return np.stack([np.bincount(lab, weights=c if full else c[keep], minlength=k)
                         for c in cols], axis=1)

    a, b, s = pop.columns
    return CellSums(sums(a), sums(b), sums(s), np.bincount(lab, minlength=k))


def best_cell_treatments(sums: CellSums, bounds) -> list[FeasibleTreatment]:
    """Profit-maximizing feasible treatment for each cell (empty cells get level 0)."""
    levels = sums.optimal_levels(bounds)
    profits = sums.profit(levels)
    dims = np.argmax(profits, axis=1)
    return [FeasibleTreatment(int(d), float(levels[k, d])) for k, d in enumerate(dims)]
