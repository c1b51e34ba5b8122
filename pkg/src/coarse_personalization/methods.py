"""Named policy constructors used by the bootstrap and experiment runners."""

from __future__ import annotations

from typing import Callable

from .benchmarks import ab_test_policy, blanket, segment_then_personalize
from .errors import ConfigurationError
from .granular import solve_granular
from .lloyd import SolverConfig, solve
from .model import FeasibleTreatment, Population, ProfitReport, SegmentedPolicy

METHODS = ("coarse", "kmeans-optimal-levels", "kmeans-preferences", "kmeans-covariates",
           "abtest", "blanket")
BENCHMARKS = METHODS[1:]
_KMEANS_FEATURE = {
    "kmeans-optimal-levels": "optimal_levels",
    "kmeans-preferences": "preferences",
    "kmeans-covariates": "covariates",
}

# dollar arms $2..$5 and percent arms 5..20%, 0-based dimensions
DEFAULT_ARMS = tuple(FeasibleTreatment(0, v) for v in (2.0, 3.0, 4.0, 5.0)) + tuple(
    FeasibleTreatment(1, v) for v in (5.0, 10.0, 15.0, 20.0))


def check_method(name: str) -> str:
    if name not in METHODS:
        raise ConfigurationError(f"unknown method {name!r}; expected one of {METHODS}")
    return name


def run_method(pop: Population, name: str, L: int, config: SolverConfig | None = None,
               arms=DEFAULT_ARMS, kmeans_starts: int = 5, granular=None, seeds=(),
               warm_start=None) -> tuple[SegmentedPolicy, ProfitReport]:
    """Build the named policy with (at most) ``L`` offers."""
    check_method(name)
    config = config or SolverConfig()
    gran = granular or solve_granular(pop)
    rbar = gran.best_return
    if name == "coarse":
        res = solve(pop, config.replace(num_treatments=min(L, len(pop))), warm_start, seeds, gran)
        return res.policy, res.report
    if name in _KMEANS_FEATURE:
        return segment_then_personalize(pop, min(L, len(pop)), _KMEANS_FEATURE[name],
                                        starts=kmeans_starts, seed=config.seed, best_return=rbar)
    if name == "abtest":
        arms = [a for a in arms if a.dim < pop.dims]
        return ab_test_policy(pop, arms, min(L, len(arms)), best_return=rbar)
    t, report = blanket(pop, best_return=rbar)
    policy = SegmentedPolicy.from_assignment([t], [0] * len(pop), {"method": "blanket"})
    return policy, report


def method_fn(name: str, L: int, config: SolverConfig | None = None, **kwargs) -> Callable:
    """``pop -> ProfitReport`` closure for one method and menu size."""
    check_method(name)

    def fn(pop: Population) -> ProfitReport:
        return run_method(pop, name, L, config, **kwargs)[1]

    fn.__name__ = f"{name}[L={L}]"
    return fn
