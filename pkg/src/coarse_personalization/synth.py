"""Synthetic populations loosely shaped like a two-promotion field test.

Dimension 1 is dollars off (cost scale 1); further dimensions are percent
off with cost scale ``spend / 100`` where ``spend`` is log-normal.
Sensitivities are log-normal per dimension and intercepts normal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .model import Population, TreatmentSpace

COVARIATE_MODES = ("linked", "unlinked", "none")


@dataclass(frozen=True)
class SynthConfig:
    seed: int
    n: int = 10_000
    upper_bounds: tuple[float, ...] = (5.0, 20.0)
    unit_labels: tuple[str, ...] = ("dollar", "percent")
    beta_loc: tuple[float, ...] = (math.log(2.5), math.log(0.9))
    beta_scale: tuple[float, ...] = (0.4, 0.5)
    spend_loc: float = math.log(15.0)
    spend_scale: float = 0.3
    alpha_mean: float = 0.0
    alpha_sd: float = 0.05
    covariates: str = "linked"
    n_covariates: int = 4
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        d = len(self.upper_bounds)
        if self.seed is None:
            raise ConfigurationError("a seed is required")
        if self.n < 1:
            raise ConfigurationError("n must be positive")
        if len(self.beta_loc) != d or len(self.beta_scale) != d or len(self.unit_labels) != d:
            raise ConfigurationError("beta_loc, beta_scale and unit_labels need one entry per dimension")
        if min(self.beta_scale) < 0 or self.spend_scale < 0 or self.alpha_sd < 0:
            raise ConfigurationError("distribution scales must be non-negative")
        if self.covariates not in COVARIATE_MODES:
            raise ConfigurationError(f"covariates must be one of {COVARIATE_MODES}")
        if self.covariates != "none" and self.n_covariates < 1:
            raise ConfigurationError("n_covariates must be positive when covariates are generated")


PRESETS = {
    "large": dict(n=100_000),
    "small": dict(n=2_000),
    "tiny": dict(n=30),
}


def preset(name: str, seed: int, **overrides) -> SynthConfig:
    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return SynthConfig(seed=seed, **{**PRESETS[name], **overrides})


def generate_population(config: SynthConfig) -> Population:
    rng = np.random.default_rng(config.seed)
    n = config.n
    d = len(config.upper_bounds)
    log_beta = np.column_stack([
        config.beta_loc[j] + config.beta_scale[j] * rng.standard_normal(n) for j in range(d)])
    beta = np.exp(log_beta)
    log_spend = config.spend_loc + config.spend_scale * rng.standard_normal(n)
    cost = np.ones((n, d))
    cost[:, 1:] = (np.exp(log_spend) / 100.0)[:, None]
    alpha = config.alpha_mean + config.alpha_sd * rng.standard_normal((n, d))

    covariates = None
    if config.covariates != "none":
        k = config.n_covariates
        noise = rng.standard_normal((n, k))
        if config.covariates == "linked":
            drivers = np.column_stack([log_beta, log_spend])
            drivers = (drivers - drivers.mean(axis=0)) / np.where(drivers.std(axis=0) > 0,
                                                                  drivers.std(axis=0), 1.0)
            covariates = noise.copy()
            for j in range(k):
                covariates[:, j] += drivers[:, j % drivers.shape[1]]
        else:
            covariates = noise

    return Population(
        space=TreatmentSpace(tuple(config.upper_bounds), tuple(config.unit_labels)),
        ids=np.array([f"c{i:07d}" for i in range(n)]),
        alpha=alpha,
        beta=beta,
        cost_scale=cost,
        covariates=covariates,
    )


def clustered_population(sizes, betas, cost_scales=None, space=None, alphas=None, seed=0) -> Population:
    """Blocks of identical individuals, one block per entry of ``betas``.

    Convenient for cases where the optimal menu is known in closed form.
    """
    betas = [np.atleast_1d(np.asarray(b, dtype=float)) for b in betas]
    d = len(betas[0])
    space = space or TreatmentSpace((5.0,) * d if d != 2 else (5.0, 20.0))
    cost_scales = cost_scales or [np.ones(d)] * len(betas)
    alphas = alphas or [np.zeros(d)] * len(betas)
    rows_b, rows_s, rows_a = [], [], []
    for size, b, s, a in zip(sizes, betas, cost_scales, alphas):
        rows_b += [b] * size
        rows_s += [np.atleast_1d(np.asarray(s, dtype=float))] * size
        rows_a += [np.atleast_1d(np.asarray(a, dtype=float))] * size
    n = len(rows_b)
    return Population(space, np.array([f"k{i}" for i in range(n)]), np.array(rows_a),
                      np.array(rows_b), np.array(rows_s))


ARM_LEVELS = ((2.0, 3.0, 4.0, 5.0), (5.0, 10.0, 15.0, 20.0))


def synth_arms(pop: Population, levels=ARM_LEVELS, noise_sd: float = 0.0, seed: int = 0):
    """Per-arm CATE estimates generated from the population's curves.

    Returns ``(arms, assigned)``: one ArmEstimates per dimension and, per
    individual, the ``(dim, level)`` arm she was randomized into (uniform
    over all arms).
    """
    from .calibrate import ArmEstimates
    if noise_sd < 0:
        raise ConfigurationError("noise_sd must be non-negative")
    rng = np.random.default_rng(seed)
    arms = []
    for d in range(pop.dims):
        lv = np.asarray(levels[d], dtype=float)
        values = pop.alpha[:, d:d + 1] + pop.beta[:, d:d + 1] * np.log1p(lv)
        if noise_sd:
            values = values + noise_sd * rng.standard_normal(values.shape)
        arms.append(ArmEstimates(lv, values))
    flat = [(d, float(v)) for d in range(pop.dims) for v in levels[d]]
    pick = rng.integers(len(flat), size=len(pop))
    return arms, [flat[j] for j in pick]
