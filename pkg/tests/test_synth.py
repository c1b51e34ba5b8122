import numpy as np
import pytest

from coarse_personalization import ConfigurationError, SolverConfig, solve, solve_granular
from coarse_personalization.calibrate import fit_population
from coarse_personalization.synth import (SynthConfig, clustered_population, generate_population,
                                          preset, synth_arms)


def test_same_seed_same_population():
    a = generate_population(SynthConfig(seed=4, n=300))
    b = generate_population(SynthConfig(seed=4, n=300))
    c = generate_population(SynthConfig(seed=5, n=300))
    assert np.array_equal(a.beta, b.beta) and np.array_equal(a.covariates, b.covariates)
    assert not np.array_equal(a.beta, c.beta)


def test_zero_scales_give_clones():
    pop = generate_population(SynthConfig(seed=1, n=50, beta_scale=(0.0, 0.0), spend_scale=0.0,
                                          alpha_sd=0.0))
    assert np.all(pop.beta == pop.beta[0])
    assert np.all(pop.cost_scale == pop.cost_scale[0])


@pytest.mark.parametrize("kw", [{"beta_scale": (-0.1, 0.5)}, {"n": 0}, {"seed": None},
                                {"covariates": "some"}, {"beta_loc": (1.0,)}])
def test_bad_configs(kw):
    with pytest.raises(ConfigurationError):
        SynthConfig(**{"seed": 0, **kw})


def test_presets():
    assert preset("tiny", 0).n == 30
    assert preset("small", 0, n=10).n == 10
    with pytest.raises(ConfigurationError):
        preset("huge", 0)


def test_default_levels_are_interior_on_median():
    pop = generate_population(SynthConfig(seed=2, n=2000))
    levels = solve_granular(pop).levels
    med = np.median(levels, axis=0)
    assert np.all(med > 0) and np.all(med < pop.space.bounds)


def test_unlinked_covariates_carry_no_signal():
    pop = generate_population(SynthConfig(seed=3, n=5000, covariates="unlinked"))
    corr = np.corrcoef(pop.covariates[:, 0], np.log(pop.beta[:, 0]))[0, 1]
    assert abs(corr) < 0.05
    linked = generate_population(SynthConfig(seed=3, n=5000))
    assert np.corrcoef(linked.covariates[:, 0], np.log(linked.beta[:, 0]))[0, 1] > 0.5


def test_clustered_population_known_menu():
    pop = clustered_population([10, 10], [[3.0], [6.0]])
    res = solve(pop, SolverConfig(num_treatments=2))
    assert sorted(t.value for t in res.policy.treatments) == [2.0, 5.0]
    assert res.report.total_regret == pytest.approx(0.0, abs=1e-12)


def test_synth_arms_round_trip_through_fit():
    pop = generate_population(SynthConfig(seed=6, n=100))
    arms, assigned = synth_arms(pop)
    fitted, _ = fit_population(pop.ids, arms, pop.cost_scale, pop.space)
    assert np.allclose(fitted.beta, pop.beta, rtol=1e-9)
    assert len(assigned) == len(pop)
    with pytest.raises(ConfigurationError):
        synth_arms(pop, noise_sd=-1.0)
