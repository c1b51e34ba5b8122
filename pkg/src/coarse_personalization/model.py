"""Domain types and the response, cost and profit primitives.

Dimensions are indexed from 0 inside the library. Files and CLI output use
1-based column suffixes (``beta_1``, ``beta_2``) to match how treatments are
usually labelled.

The response curve of individual ``i`` in dimension ``d`` is

    tau(t) = alpha[i, d] + beta[i, d] * log(1 + t)

and the cost of issuing level ``t`` is ``cost_scale[i, d] * t``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Sequence

import numpy as np

from .errors import DataError, DomainError, StructuralError

# Assignment index of the distinguished no-treatment cell.
HOLDOUT = -1


@dataclass(frozen=True)
class TreatmentSpace:
    upper_bounds: tuple[float, ...]
    unit_labels: tuple[str, ...] = ()

    def __post_init__(self):
        bounds = tuple(float(b) for b in self.upper_bounds)
        if not bounds:
            raise DataError("a treatment space needs at least one dimension")
        if not all(np.isfinite(b) and b > 0 for b in bounds):
            raise DataError(f"upper bounds must be positive and finite, got {bounds}")
        labels = tuple(self.unit_labels) or tuple(f"dim{d + 1}" for d in range(len(bounds)))
        if len(labels) != len(bounds):
            raise DataError("one unit label per dimension is required")
        object.__setattr__(self, "upper_bounds", bounds)
        object.__setattr__(self, "unit_labels", labels)

    @property
    def dims(self) -> int:
        return len(self.upper_bounds)

    @property
    def bounds(self) -> np.ndarray:
        return np.asarray(self.upper_bounds, dtype=float)

    def check(self, dim: int, t: float) -> None:
        if not 0 <= dim < self.dims:
            raise DomainError(f"dimension {dim} outside 0..{self.dims - 1}")
        if not (0.0 <= t <= self.upper_bounds[dim]):
            raise DomainError(
                f"level {t} outside [0, {self.upper_bounds[dim]}] in dimension {dim}")


@dataclass(frozen=True)
class Individual:
    """One customer's fitted response parameters.

    ``beta`` is expected to be non-negative once the population has been
    filtered; ``cost_scale`` is the marginal cost per treatment unit.
    """

    id: Any
    alpha: tuple[float, ...]
    beta: tuple[float, ...]
    cost_scale: tuple[float, ...]
    covariates: tuple[float, ...] | None = None

    def __post_init__(self):
        for name in ("alpha", "beta", "cost_scale"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if not len(self.alpha) == len(self.beta) == len(self.cost_scale):
            raise DataError("alpha, beta and cost_scale must have one entry per dimension")
        if any(s <= 0 for s in self.cost_scale):
            raise DataError(f"individual {self.id}: cost scales must be positive")

    @property
    def dims(self) -> int:
        return len(self.beta)


@dataclass(frozen=True, order=True)
class FeasibleTreatment:
    """A level in exactly one dimension, zero in all others."""

    dim: int
    value: float

    def __post_init__(self):
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "value", float(self.value))
        if self.dim < 0 or not np.isfinite(self.value) or self.value < 0:
            raise DomainError(f"infeasible treatment ({self.dim}, {self.value})")

    def as_vector(self, dims: int) -> np.ndarray:
        out = np.zeros(dims)
        out[self.dim] = self.value
        return out

    def label(self, space: TreatmentSpace | None = None) -> str:
        unit = space.unit_labels[self.dim] if space is not None else f"dim{self.dim + 1}"
        return f"{unit}:{self.value:.6g}"


@dataclass(frozen=True, eq=False)
class Population:
    """Column-oriented store of individuals sharing one treatment space.

    Arrays have shape ``(N, D)``; ``covariates`` is ``(N, K)`` or ``None``.
    """

    space: TreatmentSpace
    ids: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    cost_scale: np.ndarray
    covariates: np.ndarray | None = None
    covariate_names: tuple[str, ...] = ()

    def __post_init__(self):
        n = len(self.ids)
        d = self.space.dims
        ids = np.asarray(self.ids)
        if ids.dtype.kind == "O":
            ids = ids.astype(str)
        object.__setattr__(self, "ids", ids)
        for name in ("alpha", "beta", "cost_scale"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=float)
            if arr.ndim == 1 and d == 1:
                arr = arr.reshape(-1, 1)
            if arr.shape != (n, d):
                raise DataError(f"{name} has shape {arr.shape}, expected {(n, d)}")
            if not np.all(np.isfinite(arr)):
                raise DataError(f"{name} contains non-finite values")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.cost_scale <= 0):
            bad = int(np.argwhere(self.cost_scale <= 0)[0, 0])
            raise DataError(f"individual {ids[bad]} has a non-positive cost scale")
        if self.covariates is not None:
            cov = np.ascontiguousarray(self.covariates, dtype=float)
            if cov.ndim != 2 or cov.shape[0] != n:
                raise DataError("covariates must be an (N, K) matrix")
            cov.setflags(write=False)
            object.__setattr__(self, "covariates", cov)
            names = tuple(self.covariate_names) or tuple(f"x_{k + 1}" for k in range(cov.shape[1]))
            object.__setattr__(self, "covariate_names", names)

    @classmethod
    def from_individuals(cls, individuals: Sequence[Individual], space: TreatmentSpace) -> Population:
        covs = None
        if individuals and all(ind.covariates is not None for ind in individuals):
            covs = np.array([ind.covariates for ind in individuals], dtype=float)
        return cls(
            space=space,
            ids=np.array([str(ind.id) for ind in individuals]),
            alpha=np.array([ind.alpha for ind in individuals], dtype=float).reshape(-1, space.dims),
            beta=np.array([ind.beta for ind in individuals], dtype=float).reshape(-1, space.dims),
            cost_scale=np.array([ind.cost_scale for ind in individuals], dtype=float).reshape(-1, space.dims),
            covariates=covs,
        )

    def __len__(self) -> int:
        return len(self.ids)

    def __getitem__(self, i: int) -> Individual:
        cov = None if self.covariates is None else tuple(self.covariates[i])
        return Individual(self.ids[i], tuple(self.alpha[i]), tuple(self.beta[i]),
                          tuple(self.cost_scale[i]), cov)

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def dims(self) -> int:
        return self.space.dims

    @cached_property
    def columns(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Contiguous ``(D, N)`` copies of alpha, beta and cost scale."""
        out = tuple(np.ascontiguousarray(a.T) for a in (self.alpha, self.beta, self.cost_scale))
        for a in out:
            a.setflags(write=False)
        return out

    def take(self, index) -> Population:
        index = np.asarray(index)
        return Population(
            space=self.space,
            ids=self.ids[index],
            alpha=self.alpha[index],
            beta=self.beta[index],
            cost_scale=self.cost_scale[index],
            covariates=None if self.covariates is None else self.covariates[index],
            covariate_names=self.covariate_names,
        )

    def replace(self, **changes) -> Population:
        fields = dict(space=self.space, ids=self.ids, alpha=self.alpha, beta=self.beta,
                      cost_scale=self.cost_scale, covariates=self.covariates,
                      covariate_names=self.covariate_names)
        fields.update(changes)
        return Population(**fields)

    def zero_intercept(self) -> Population:
        """Copy with every alpha set to zero (pure incremental semantics)."""
        return self.replace(alpha=np.zeros_like(self.alpha))


@dataclass(frozen=True, eq=False)
class SegmentedPolicy:
    """L offered treatments and the assignment of every individual to one.

    ``assignment[i]`` indexes ``treatments``; ``HOLDOUT`` marks the optional
    no-treatment cell. ``masses[l]`` is the share of individuals in cell l.
    """

    treatments: tuple[FeasibleTreatment, ...]
    assignment: np.ndarray
    masses: np.ndarray
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_assignment(cls, treatments, assignment, meta=None) -> SegmentedPolicy:
        treatments = tuple(treatments)
        assignment = np.asarray(assignment, dtype=np.int64)
        n = len(assignment)
        counts = np.bincount(assignment[assignment >= 0], minlength=len(treatments))
        masses = counts / n if n else np.zeros(len(treatments))
        return cls(treatments, assignment, masses.astype(float), dict(meta or {}))

    def __post_init__(self):
        assignment = np.asarray(self.assignment, dtype=np.int64)
        assignment.setflags(write=False)
        object.__setattr__(self, "assignment", assignment)
        masses = np.asarray(self.masses, dtype=float)
        masses.setflags(write=False)
        object.__setattr__(self, "masses", masses)
        if len(masses) != len(self.treatments):
            raise StructuralError("one mass per offered treatment is required")
        if assignment.size and (assignment.max() >= len(self.treatments) or assignment.min() < HOLDOUT):
            raise StructuralError("assignment index out of range")

    @property
    def num_treatments(self) -> int:
        return len(self.treatments)

    @property
    def holdout_mass(self) -> float:
        n = len(self.assignment)
        return float(np.count_nonzero(self.assignment == HOLDOUT) / n) if n else 0.0

    def counts(self) -> np.ndarray:
        a = self.assignment
        return np.bincount(a[a >= 0], minlength=len(self.treatments))

    def unique_treatments(self) -> tuple[FeasibleTreatment, ...]:
        return tuple(sorted(set(self.treatments)))

    def equals(self, other: SegmentedPolicy) -> bool:
        return (self.treatments == other.treatments
                and np.array_equal(self.assignment, other.assignment)
                and np.array_equal(self.masses, other.masses)
                and self.meta == other.meta)

    def __eq__(self, other):
        if not isinstance(other, SegmentedPolicy):
            return NotImplemented
        return self.equals(other)

    __hash__ = None


@dataclass(frozen=True)
class SegmentProfit:
    treatment: FeasibleTreatment | None
    members: int
    profit: float


@dataclass(frozen=True)
class ProfitReport:
    total_profit: float
    total_regret: float
    squared_regret: float
    per_segment: tuple[SegmentProfit, ...] = ()
    granular_profit: float = 0.0
    menu_cost: float = 0.0

    @property
    def objective(self) -> float:
        """Transport objective: squared regret plus the menu cost."""
        return self.squared_regret + self.menu_cost

    @property
    def ratio_to_granular(self) -> float:
        if self.granular_profit == 0:
            return float("nan")
        return self.total_profit / self.granular_profit


def _check(ind: Individual, dim: int, t: float, space: TreatmentSpace | None) -> None:
    if not 0 <= dim < ind.dims:
        raise DomainError(f"dimension {dim} outside 0..{ind.dims - 1}")
    if space is not None:
        space.check(dim, t)
    elif not (t >= 0 and np.isfinite(t)):
        raise DomainError(f"level {t} must be finite and non-negative")


def cate_value(ind: Individual, dim: int, t: float, space: TreatmentSpace | None = None) -> float:
    _check(ind, dim, t, space)
    return ind.alpha[dim] + ind.beta[dim] * np.log1p(t)


def treatment_cost(ind: Individual, dim: int, t: float, space: TreatmentSpace | None = None) -> float:
    _check(ind, dim, t, space)
    return ind.cost_scale[dim] * t


def incremental_profit(ind: Individual, dim: int, t: float, space: TreatmentSpace | None = None) -> float:
    return cate_value(ind, dim, t, space) - treatment_cost(ind, dim, t, space)


def profit_at(pop: Population, dim: int, value: float, rows=None) -> np.ndarray:
    """Incremental profit of every individual (or ``rows``) at one feasible treatment."""
    sl = slice(None) if rows is None else rows
    return pop.alpha[sl, dim] + pop.beta[sl, dim] * np.log1p(value) - pop.cost_scale[sl, dim] * value


def profit_matrix(pop: Population, treatments: Sequence[FeasibleTreatment], rows=None) -> np.ndarray:
    """``(N, L)`` matrix of incremental profit for every individual and offer."""
    n = len(pop) if rows is None else len(np.arange(len(pop))[rows])
    out = np.empty((n, len(treatments)))
    for l, tr in enumerate(treatments):
        out[:, l] = profit_at(pop, tr.dim, tr.value, rows)
    return out


def assigned_profit(pop: Population, policy: SegmentedPolicy) -> np.ndarray:
    """Per-individual profit under a policy; holdout individuals earn 0."""
    if len(policy.assignment) != len(pop):
        raise StructuralError(
            f"policy covers {len(policy.assignment)} individuals, population has {len(pop)}")
    out = np.zeros(len(pop))
    for l, tr in enumerate(policy.treatments):
        rows = np.flatnonzero(policy.assignment == l)
        if rows.size:
            out[rows] = profit_at(pop, tr.dim, tr.value, rows)
    return out


def policy_profit(pop: Population, policy: SegmentedPolicy, best_return=None,
                  menu_cost: float = 0.0) -> ProfitReport:
    """Profit, regret and per-segment totals of ``policy`` on ``pop``.

    ``best_return`` is the granular benchmark per individual; computed when
    omitted.
    """
    if best_return is None:
        from .granular import solve_granular
        best_return = solve_granular(pop).best_return
    profits = assigned_profit(pop, policy)
    regret = np.maximum(best_return - profits, 0.0)
    counts = policy.counts()
    seg_profit = np.bincount(policy.assignment[policy.assignment >= 0],
                             weights=profits[policy.assignment >= 0],
                             minlength=len(policy.treatments))
    segments = [SegmentProfit(tr, int(counts[l]), float(seg_profit[l]))
                for l, tr in enumerate(policy.treatments)]
    held = int(np.count_nonzero(policy.assignment == HOLDOUT))
    if held:
        segments.append(SegmentProfit(None, held, 0.0))
    return ProfitReport(
        total_profit=float(profits.sum()),
        total_regret=float(regret.sum()),
        squared_regret=float(np.dot(regret, regret)),
        per_segment=tuple(segments),
        granular_profit=float(np.sum(best_return)),
        menu_cost=float(menu_cost),
    )
