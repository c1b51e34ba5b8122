"""Fit log response curves to per-arm CATE estimates.

Each individual has estimated effects at a handful of experimental arm
levels per dimension. We regress them on ``log(1 + t)`` with an intercept,
drop individuals that respond in no dimension, and offer an honest
(leave-one-arm-out) check of the functional form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DataError
from .model import Population, TreatmentSpace


@dataclass(frozen=True, eq=False)
class ArmEstimates:
    """Estimated CATEs for one dimension.

    ``levels`` has shape ``(K,)`` and is shared by every individual;
    ``values`` has shape ``(N, K)``.
    """

    levels: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        levels = np.asarray(self.levels, dtype=float).ravel()
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values.reshape(1, -1)
        if values.shape[1] != len(levels):
            raise DataError(f"{values.shape[1]} estimates per individual for {len(levels)} arms")
        if np.any(levels <= 0):
            raise DataError("arm levels must be strictly positive")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True, eq=False)
class CurveFit:
    alpha: np.ndarray
    beta: np.ndarray
    r_squared: np.ndarray


def _ols_log(levels: np.ndarray, values: np.ndarray) -> CurveFit:
    """Row-wise OLS of ``values`` on ``log1p(levels)`` with intercept."""
    x = np.log1p(levels)
    if np.ptp(x) == 0:
        raise ConfigurationError("all arm levels are identical; alpha and beta are not identified")
    xc = x - x.mean()
    sxx = np.dot(xc, xc)
    ybar = values.mean(axis=-1)
    beta = (values - ybar[..., None]) @ xc / sxx
    alpha = ybar - beta * x.mean()
    fitted = alpha[..., None] + beta[..., None] * x
    ss_res = np.sum((values - fitted) ** 2, axis=-1)
    ss_tot = np.sum((values - ybar[..., None]) ** 2, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        r2 = np.where(ss_tot > 0, 1.0 - ss_res / ss_tot, np.where(ss_res <= 1e-24, 1.0, np.nan))
    return CurveFit(alpha, beta, r2)


def fit_response_curve(levels, values) -> tuple[float, float, float]:
    """Fit ``tau = alpha + beta * log(1 + t)`` for one individual and dimension."""
    levels = np.asarray(levels, dtype=float)
    if len(np.unique(levels)) < 2:
        raise ConfigurationError("at least two distinct arm levels are needed")
    fit = _ols_log(levels, np.asarray(values, dtype=float))
    return float(fit.alpha), float(fit.beta), float(fit.r_squared)


def fit_arms(arms: ArmEstimates) -> CurveFit:
    """Vectorized fit over every individual of one dimension."""
    if len(np.unique(arms.levels)) < 2:
        raise ConfigurationError("at least two distinct arm levels are needed")
    return _ols_log(arms.levels, arms.values)


def fit_population(ids, arms_by_dim: list[ArmEstimates], cost_scale, space: TreatmentSpace,
                   covariates=None, covariate_names=()) -> tuple[Population, list[CurveFit]]:
    """Fit every dimension and assemble an (unfiltered) population."""
    if len(arms_by_dim) != space.dims:
        raise DataError(f"arm estimates for {len(arms_by_dim)} dimensions, space has {space.dims}")
    fits = [fit_arms(a) for a in arms_by_dim]
    for d, a in enumerate(arms_by_dim):
        if np.any(a.levels > space.upper_bounds[d]):
            raise DataError(f"arm level above the upper bound in dimension {d + 1}")
    pop = Population(
        space=space,
        ids=np.asarray(ids),
        alpha=np.column_stack([f.alpha for f in fits]),
        beta=np.column_stack([f.beta for f in fits]),
        cost_scale=np.asarray(cost_scale, dtype=float).reshape(len(ids), space.dims),
        covariates=covariates,
        covariate_names=tuple(covariate_names),
    )
    return pop, fits


def mean_r_squared(fits: list[CurveFit]) -> list[float]:
    """Unweighted mean in-sample R^2 per dimension."""
    return [float(np.nanmean(f.r_squared)) for f in fits]


def filter_population(pop: Population, beta_floor: float = 1e-6):
    """Drop individuals with ``beta <= beta_floor`` in every dimension.

    Survivors keep their responsive dimensions; the others are clamped to
    ``beta = 0``. Returns ``(kept, dropped_ids)``.
    """
    responsive = pop.beta > beta_floor
    keep = responsive.any(axis=1)
    kept = pop.take(np.flatnonzero(keep))
    kept = kept.replace(beta=np.where(responsive[keep], kept.beta, 0.0))
    return kept, pop.ids[~keep].tolist()


@dataclass(frozen=True, eq=False)
class HonestValidation:
    predicted: np.ndarray
    observed: np.ndarray
    holdout_levels: np.ndarray
    correlation: float
    mean_r_squared: float

    @property
    def errors(self) -> np.ndarray:
        return self.predicted - self.observed


def honest_validate(arms: ArmEstimates, holdout: np.ndarray) -> HonestValidation:
    """Leave each individual's designated arm out, refit, predict it back.

    ``holdout[i]`` is the column of ``arms.levels`` held out for individual i
    (typically the arm she was randomized into).
    """
    k = len(arms.levels)
    if k < 3:
        raise ConfigurationError(f"honest validation needs at least 3 arms, got {k}")
    holdout = np.asarray(holdout, dtype=np.int64)
    n = arms.values.shape[0]
    if holdout.shape != (n,) or holdout.min(initial=0) < 0 or holdout.max(initial=0) >= k:
        raise DataError("one holdout arm index per individual is required")
    pred = np.empty(n)
    r2 = np.empty(n)
    for j in range(k):
        rows = np.flatnonzero(holdout == j)
        if not rows.size:
            continue
        keep = np.arange(k) != j
        fit = _ols_log(arms.levels[keep], arms.values[np.ix_(rows, keep)])
        pred[rows] = fit.alpha + fit.beta * np.log1p(arms.levels[j])
        r2[rows] = fit.r_squared
    observed = arms.values[np.arange(n), holdout]
    if n > 1 and np.std(pred) > 0 and np.std(observed) > 0:
        corr = float(np.corrcoef(pred, observed)[0, 1])
    elif n > 1 and np.allclose(pred, observed, rtol=0, atol=1e-12):
        corr = 1.0
    else:
        corr = float("nan")
    return HonestValidation(pred, observed, arms.levels[holdout], corr, float(np.nanmean(r2)))
