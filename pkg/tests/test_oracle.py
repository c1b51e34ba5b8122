import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_pop
from coarse_personalization import (ConfigurationError, SolverConfig, grid_solve, refine_solve,
                                    solve, speed_benchmark)
from coarse_personalization.errors import EnumerationCapError
from coarse_personalization.model import profit_matrix
from coarse_personalization.oracle import dimension_compositions, treatment_grid


def naive_grid(pop, L, G):
    """Loop over every subset with plain Python sums."""
    grid = treatment_grid(pop, G)
    P = profit_matrix(pop, grid)
    best = -np.inf
    for combo in itertools.combinations(range(len(grid)), L):
        total = sum(max(P[i, j] for j in combo) for i in range(len(pop)))
        best = max(best, total)
    return best


def test_grid_levels():
    pop = make_pop(5, 0)
    g = treatment_grid(pop, 4)
    assert [t.value for t in g if t.dim == 0] == [1.25, 2.5, 3.75, 5.0]
    assert [t.value for t in treatment_grid(pop, 3, include_zero=True) if t.dim == 1] == [0.0, 10.0, 20.0]
    with pytest.raises(ConfigurationError):
        treatment_grid(pop, 0)


@settings(max_examples=10)
@given(seed=st.integers(0, 5000), L=st.integers(1, 3))
def test_grid_solve_matches_naive(seed, L):
    pop = make_pop(8, seed)
    _, rep = grid_solve(pop, L, 4)
    assert rep.total_profit == pytest.approx(naive_grid(pop, L, 4), rel=1e-12)


def test_composition_counts():
    assert len(dimension_compositions(2, 5)) == 6
    assert len(dimension_compositions(3, 3)) == 10
    assert dimension_compositions(2, 2) == [(0, 0), (0, 1), (1, 1)]


def test_caps():
    pop = make_pop(6, 1)
    with pytest.raises(EnumerationCapError):
        grid_solve(pop, 3, 41, cap=1000)
    with pytest.raises(ConfigurationError):
        grid_solve(pop, 5, 2)
    with pytest.raises(ConfigurationError):
        refine_solve(pop, 7)


def test_refine_dominates_grid_and_lloyd_matches():
    pop = make_pop(20, 12)
    for L in (1, 2):
        _, grid = grid_solve(pop, L, 21)
        _, ref = refine_solve(pop, L)
        lloyd = solve(pop, SolverConfig(num_treatments=L, num_starts=8)).report.total_profit
        assert ref.total_profit >= grid.total_profit - 1e-6
        assert lloyd >= ref.total_profit - 1e-9 * abs(ref.total_profit)


def test_speed_benchmark_fields():
    res = speed_benchmark(make_pop(200, 2), 2, 5)
    assert res.lloyd_seconds > 0 and res.grid_seconds > 0
    assert res.config["G"] == 5 and res.config["solver"]["num_treatments"] == 2
    assert res.lloyd_profit >= res.grid_profit - 1e-6
