"""Consumer, producer and total surplus of a coarse policy relative to the
granular one.

Treatments are valued as transfers: a customer values an offer at what it
costs the firm (face value for dollars off, rate times past spend for
percent off). Producer surplus change is minus the regret.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import StructuralError
from .granular import GranularSolution, solve_granular
from .model import FeasibleTreatment, Individual, Population, SegmentedPolicy, assigned_profit


def valuation(ind: Individual, treatment: FeasibleTreatment) -> float:
    """Monetary value of an offer to the customer (equal to its cost to the firm)."""
    return ind.cost_scale[treatment.dim] * treatment.value


def _valuation_vector(pop: Population, dims: np.ndarray, values: np.ndarray) -> np.ndarray:
    out = np.zeros(len(pop))
    served = dims >= 0
    rows = np.flatnonzero(served)
    out[rows] = pop.cost_scale[rows, dims[rows]] * values[rows]
    return out


@dataclass(frozen=True)
class SurplusGroup:
    treatment: FeasibleTreatment | None
    members: int
    delta_cs: float
    delta_ps: float
    delta_ts: float
    share_cs_positive: float
    share_ps_positive: float
    share_ts_positive: float


@dataclass(frozen=True, eq=False)
class SurplusReport:
    delta_cs: np.ndarray
    delta_ps: np.ndarray
    delta_ts: np.ndarray
    overall: SurplusGroup
    by_treatment: tuple[SurplusGroup, ...]


def _group(treatment, cs, ps, ts) -> SurplusGroup:
    n = len(cs)

    def share(x):
        return float(np.count_nonzero(x > 0) / n * 100.0) if n else 0.0

    return SurplusGroup(treatment, n, float(cs.sum()), float(ps.sum()), float(ts.sum()),
                        share(cs), share(ps), share(ts))


def surplus_decomposition(pop: Population, coarse: SegmentedPolicy,
                          granular: GranularSolution | None = None,
                          valuation_fn: Callable | None = None) -> SurplusReport:
    """Per-individual and grouped surplus changes, coarse minus granular.

    ``valuation_fn(pop, dims, values)`` may replace the transfer valuation;
    ``dims`` is -1 for individuals left untreated.
    """
    if len(coarse.assignment) != len(pop):
        raise StructuralError("policy and population sizes differ")
    gran = granular or solve_granular(pop)
    if len(gran.best_return) != len(pop):
        raise StructuralError("granular solution and population sizes differ")
    value_of = valuation_fn or _valuation_vector
    a = coarse.assignment
    t_dims = np.array([t.dim for t in coarse.treatments] + [-1])
    t_vals = np.array([t.value for t in coarse.treatments] + [0.0])
    v_coarse = value_of(pop, t_dims[a], t_vals[a])
    v_gran = value_of(pop, gran.best_dim, gran.best_level)
    d_cs = v_coarse - v_gran
    d_ps = assigned_profit(pop, coarse) - gran.best_return
    d_ts = d_cs + d_ps
    groups = []
    for l, t in enumerate(coarse.treatments):
        rows = a == l
        groups.append(_group(t, d_cs[rows], d_ps[rows], d_ts[rows]))
    if np.any(a < 0):
        rows = a < 0
        groups.append(_group(None, d_cs[rows], d_ps[rows], d_ts[rows]))
    return SurplusReport(d_cs, d_ps, d_ts, _group(None, d_cs, d_ps, d_ts), tuple(groups))
