"""Second-step bootstrap.

Fitted response parameters are treated as ground truth; only individuals
are resampled, and only the segmentation/assignment step is rerun.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigurationError
from .model import Population


@dataclass(frozen=True, eq=False)
class BootstrapResult:
    replicates: np.ndarray      # total profit per replicate
    granular: np.ndarray        # granular ceiling per replicate
    seed: int

    @property
    def mean(self) -> float:
        return float(np.mean(self.replicates))

    @property
    def sd(self) -> float:
        """Sample standard deviation (ddof=1); 0 for a single replicate."""
        if len(self.replicates) < 2:
            return 0.0
        return float(np.std(self.replicates, ddof=1))

    @property
    def ratios(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.replicates / self.granular


def resample_indices(n: int, rng: np.random.Generator) -> np.ndarray:
    return np.sort(rng.integers(0, n, size=n))


def bootstrap_second_step(pop: Population, B: int, method: Callable, seed: int,
                          resampler: Callable | None = None, threads: int = 1) -> BootstrapResult:
    """Rerun ``method`` (``pop -> ProfitReport``) on ``B`` resampled populations.

    ``resampler(n, rng)`` returns row indices; it defaults to a uniform draw
    with replacement. Replicate ``b`` uses its own spawned stream, so the
    result does not depend on ``threads``.
    """
    if B < 1:
        raise ConfigurationError("B must be at least 1")
    draw = resampler or resample_indices
    streams = np.random.SeedSequence(seed).spawn(B)
    n = len(pop)

    def one(ss):
        idx = draw(n, np.random.default_rng(ss))
        report = method(pop.take(idx))
        return report.total_profit, report.granular_profit

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(one, streams))
    else:
        out = [one(ss) for ss in streams]
    return BootstrapResult(np.array([o[0] for o in out]), np.array([o[1] for o in out]), seed)
