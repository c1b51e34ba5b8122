import json

import numpy as np
import pytest

from conftest import make_pop
from coarse_personalization import ConfigurationError, ExperimentSpec, run_experiment
from coarse_personalization.bootstrap import bootstrap_second_step
from coarse_personalization.methods import METHODS, method_fn, run_method


def test_bootstrap_identity_resample():
    pop = make_pop(30, 1)
    fn = method_fn("coarse", 2)
    res = bootstrap_second_step(pop, 1, fn, seed=0, resampler=lambda n, rng: np.arange(n))
    assert res.replicates[0] == fn(pop).total_profit
    assert res.sd == 0.0


def test_bootstrap_thread_invariant():
    pop = make_pop(40, 2)
    fn = method_fn("blanket", 1)
    a = bootstrap_second_step(pop, 6, fn, seed=3)
    b = bootstrap_second_step(pop, 6, fn, seed=3, threads=3)
    assert np.array_equal(a.replicates, b.replicates)
    assert a.sd == pytest.approx(np.std(a.replicates, ddof=1))
    with pytest.raises(ConfigurationError):
        bootstrap_second_step(pop, 0, fn, seed=0)


@pytest.mark.parametrize("name", METHODS)
def test_every_method_runs(small_pop, name):
    policy, report = run_method(small_pop, name, 3)
    assert policy.num_treatments <= 3
    assert report.total_profit <= report.granular_profit + 1e-9


def test_unknown_method():
    with pytest.raises(ConfigurationError):
        run_method(make_pop(10, 0), "magic", 2)


def test_spec_parse():
    spec = ExperimentSpec.parse("""
        # a comment
        preset = tiny
        seed = 7
        L_max = 3   # trailing comment
        methods = coarse, blanket
        ex_ante_steps = 1, 0.5
        allow_holdout = yes
    """)
    assert spec.seed == 7 and spec.L_max == 3 and spec.methods == ("coarse", "blanket")
    assert spec.ex_ante_steps == (1.0, 0.5) and spec.allow_holdout
    assert spec.config_hash() == ExperimentSpec.parse(
        "preset=tiny\nseed=7\nL_max=3\nmethods=coarse,blanket\nex_ante_steps=1,0.5\nallow_holdout=1").config_hash()


@pytest.mark.parametrize("text", ["colour = red", "seed = x", "methods = coarse,magic",
                                  "methods = blanket", "L_min = 4\nL_max = 2", "arms = 1:x"])
def test_spec_errors(text):
    with pytest.raises(ConfigurationError):
        ExperimentSpec.parse(text)


def test_ratio_is_one_when_every_individual_has_a_segment(tmp_path):
    pop = make_pop(6, 5)
    spec = ExperimentSpec(seed=1, L_max=6, methods=("coarse",), ex_ante_steps=(1.0,),
                          ex_post_steps=(1.0,))
    bundle = run_experiment(spec, population=pop)
    ratios = bundle.column("profit_vs_L.csv", "coarse_ratio")
    assert ratios[-1] == pytest.approx(1.0, abs=1e-12)
    files = bundle.write(tmp_path)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["seed"] == 1 and manifest["config_sha256"] == spec.config_hash()
    assert {p.name for p in files} >= {"profit_vs_L.csv", "menus.csv", "manifest.json"}
