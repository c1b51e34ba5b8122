import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coarse_personalization import (DataError, DomainError, FeasibleTreatment, Individual,
                                    Population, SegmentedPolicy, StructuralError, TreatmentSpace,
                                    cate_value, incremental_profit, policy_profit, solve_granular,
                                    treatment_cost)
from coarse_personalization.model import HOLDOUT, assigned_profit, profit_at, profit_matrix

pos = st.floats(0.01, 50.0)
level = st.floats(0.0, 20.0)


@given(a=st.floats(-5, 5), b=pos, s=pos, t=level)
def test_profit_is_value_minus_cost(a, b, s, t):
    ind = Individual("x", (a,), (b,), (s,))
    assert incremental_profit(ind, 0, t) == cate_value(ind, 0, t) - treatment_cost(ind, 0, t)


@given(b=pos, s=pos, t=st.floats(0.0, 15.0), h=st.floats(0.01, 2.0))
def test_profit_strictly_concave_on_collinear_points(b, s, t, h):
    ind = Individual("x", (0.3,), (b,), (s,))
    f = [incremental_profit(ind, 0, t + k * h) for k in range(3)]
    # the cost is linear, so the second difference is that of b*log(1+t)
    second = b * (math.log1p(t + 2 * h) - 2 * math.log1p(t + h) + math.log1p(t))
    assert second < 0
    assert f[2] - 2 * f[1] + f[0] == pytest.approx(second, rel=1e-6, abs=1e-9)


@given(s=pos, t1=level, t2=level)
def test_cost_is_linear(s, t1, t2):
    ind = Individual("x", (0.0,), (1.0,), (s,))
    assert treatment_cost(ind, 0, t1 + t2) == pytest.approx(
        treatment_cost(ind, 0, t1) + treatment_cost(ind, 0, t2), rel=1e-12, abs=1e-12)


def test_space_checks():
    space = TreatmentSpace((5.0, 20.0), ("dollar", "percent"))
    space.check(1, 20.0)
    with pytest.raises(DomainError):
        space.check(0, 5.5)
    with pytest.raises(DomainError):
        space.check(2, 1.0)
    with pytest.raises(DataError):
        TreatmentSpace((0.0,))
    with pytest.raises(DataError):
        TreatmentSpace((1.0, 2.0), ("a",))
    assert TreatmentSpace((1.0,)).unit_labels == ("dim1",)


def test_level_outside_space_is_rejected():
    ind = Individual("x", (0.0, 0.0), (1.0, 1.0), (1.0, 1.0))
    with pytest.raises(DomainError):
        cate_value(ind, 0, 6.0, TreatmentSpace((5.0, 20.0)))
    with pytest.raises(DomainError):
        cate_value(ind, 0, -1.0)


def test_treatment_validation_and_labels():
    with pytest.raises(DomainError):
        FeasibleTreatment(0, -0.5)
    t = FeasibleTreatment(1, 10)
    assert t.value == 10.0 and isinstance(t.dim, int)
    assert np.array_equal(t.as_vector(2), [0.0, 10.0])
    assert t.label(TreatmentSpace((5.0, 20.0), ("dollar", "percent"))) == "percent:10"


def test_population_validation():
    space = TreatmentSpace((5.0,))
    with pytest.raises(DataError):
        Population(space, np.array(["a"]), [[0.0]], [[1.0]], [[0.0]])
    with pytest.raises(DataError):
        Population(space, np.array(["a"]), [[np.nan]], [[1.0]], [[1.0]])
    with pytest.raises(DataError):
        Population(space, np.array(["a", "b"]), [[0.0]], [[1.0]], [[1.0]])
    with pytest.raises(DataError):
        Individual("a", (0.0,), (1.0,), (-1.0,))


def test_population_round_trips_individuals(tiny_pop):
    rebuilt = Population.from_individuals(list(tiny_pop), tiny_pop.space)
    assert np.array_equal(rebuilt.beta, tiny_pop.beta)
    assert np.array_equal(rebuilt.ids, tiny_pop.ids)
    sub = tiny_pop.take([3, 1])
    assert sub[0].beta == tiny_pop[3].beta
    assert np.all(tiny_pop.zero_intercept().alpha == 0)
    a, b, s = tiny_pop.columns
    assert np.array_equal(b, tiny_pop.beta.T)


def test_profit_matrix_matches_scalar(tiny_pop):
    offers = [FeasibleTreatment(0, 1.5), FeasibleTreatment(1, 7.0)]
    P = profit_matrix(tiny_pop, offers)
    for i in range(len(tiny_pop)):
        for l, t in enumerate(offers):
            assert P[i, l] == pytest.approx(incremental_profit(tiny_pop[i], t.dim, t.value), rel=1e-13)
    assert np.array_equal(profit_at(tiny_pop, 1, 7.0, [2, 4]), P[[2, 4], 1])


def test_policy_structure_and_equality():
    t = (FeasibleTreatment(0, 1.0), FeasibleTreatment(1, 2.0))
    p = SegmentedPolicy.from_assignment(t, [0, 1, 1, HOLDOUT], {"k": 1})
    assert np.allclose(p.masses, [0.25, 0.5])
    assert p.holdout_mass == 0.25
    assert p == SegmentedPolicy.from_assignment(t, [0, 1, 1, HOLDOUT], {"k": 1})
    assert p != SegmentedPolicy.from_assignment(t, [0, 1, 0, HOLDOUT], {"k": 1})
    with pytest.raises(StructuralError):
        SegmentedPolicy.from_assignment(t, [0, 2])
    with pytest.raises(StructuralError):
        SegmentedPolicy(t, np.array([0]), np.array([1.0]))


def test_holdout_earns_zero(tiny_pop):
    t = (FeasibleTreatment(0, 1.0),)
    a = np.zeros(len(tiny_pop), dtype=int)
    a[:5] = HOLDOUT
    p = SegmentedPolicy.from_assignment(t, a)
    prof = assigned_profit(tiny_pop, p)
    assert np.all(prof[:5] == 0.0)
    rep = policy_profit(tiny_pop, p)
    assert rep.per_segment[-1].treatment is None and rep.per_segment[-1].members == 5


@given(seed=st.integers(0, 10_000), L=st.integers(1, 4))
def test_profit_plus_regret_is_ceiling(seed, L):
    from conftest import make_pop
    pop = make_pop(20, seed)
    rng = np.random.default_rng(seed)
    offers = [FeasibleTreatment(int(d), float(rng.uniform(0, pop.space.upper_bounds[d])))
              for d in rng.integers(0, 2, size=L)]
    policy = SegmentedPolicy.from_assignment(offers, rng.integers(0, L, size=len(pop)))
    rep = policy_profit(pop, policy)
    ceiling = solve_granular(pop).best_return.sum()
    assert rep.total_profit + rep.total_regret == pytest.approx(ceiling, rel=1e-6)
    assert rep.objective == rep.squared_regret


def test_policy_size_mismatch(tiny_pop):
    p = SegmentedPolicy.from_assignment([FeasibleTreatment(0, 1.0)], [0, 0])
    with pytest.raises(StructuralError):
        policy_profit(tiny_pop, p)
