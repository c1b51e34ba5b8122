import json

import pytest

from coarse_personalization.cli import main
from coarse_personalization.io import load_policy
from coarse_personalization.synth import SynthConfig, generate_population, synth_arms
from coarse_personalization.io import save_arms


@pytest.fixture(scope="module")
def pop_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "pop.csv"
    assert main(["synth", "--preset", "tiny", "--n", "80", "--seed", "3", "-o", str(path)]) == 0
    return path


def test_solve_writes_policy_and_trace(pop_csv, tmp_path, capsys):
    out, trace = tmp_path / "p.json", tmp_path / "t.jsonl"
    assert main(["solve", str(pop_csv), "--segments", "3", "-o", str(out), "--trace", str(trace)]) == 0
    assert "total_profit" in capsys.readouterr().out
    assert load_policy(out).num_treatments == 3
    assert all(json.loads(line)["seed_kind"] for line in trace.read_text().splitlines())


def test_solve_menu_and_expost(pop_csv, capsys):
    assert main(["solve", str(pop_csv), "--menu-max", "4", "--menu-cost", "linear:0.5",
                 "--expost-step", "1"]) == 0
    out = capsys.readouterr().out
    assert "selected_L" in out and "effective_treatments" in out


@pytest.mark.parametrize("args", [
    ["oracle", "--segments", "2", "--grid-points", "6"],
    ["oracle", "--segments", "2", "--method", "refine"],
    ["benchmark", "--method", "abtest", "--segments", "2"],
    ["benchmark", "--method", "blanket", "--treatment", "1:3"],
    ["benchmark", "--method", "kmeans-preferences"],
    ["bootstrap", "--replicates", "3", "--segments", "2"],
])
def test_commands_succeed(pop_csv, args):
    assert main([args[0], str(pop_csv)] + args[1:]) == 0


def test_surplus(pop_csv, tmp_path, capsys):
    policy = tmp_path / "p.json"
    main(["solve", str(pop_csv), "--segments", "2", "-o", str(policy)])
    assert main(["surplus", str(pop_csv), str(policy), "-o", str(tmp_path / "s.csv")]) == 0
    assert "delta_ts" in capsys.readouterr().out
    assert (tmp_path / "s.csv").read_text().startswith("treatment,")


def test_fit_and_validate(tmp_path):
    pop = generate_population(SynthConfig(seed=2, n=30, covariates="none"))
    arms, assigned = synth_arms(pop, noise_sd=0.05)
    path = tmp_path / "arms.csv"
    save_arms(path, pop.ids, pop.space, arms, pop.cost_scale, assigned)
    assert main(["fit", str(path), "-o", str(tmp_path / "fitted.csv")]) == 0
    assert main(["validate", str(path), "-o", str(tmp_path / "v.csv")]) == 0


def test_experiment(tmp_path):
    spec = tmp_path / "spec.txt"
    spec.write_text("preset = tiny\nL_max = 2\nmethods = coarse, blanket\n")
    assert main(["experiment", str(spec), "--seed", "4", "-o", str(tmp_path / "out")]) == 0
    assert json.loads((tmp_path / "out" / "manifest.json").read_text())["seed"] == 4


def test_exit_codes(pop_csv, tmp_path, capsys):
    assert main(["solve", str(pop_csv), "--segments", "0"]) == 2
    assert main(["solve", str(pop_csv), "--menu-cost", "cubic:1"]) == 2
    assert main(["solve", str(tmp_path / "missing.csv")]) == 3
    bad = tmp_path / "bad.csv"
    bad.write_text("# upper_bounds=5\nid,alpha_1,beta_1,cost_scale_1\na,0,zz,1\n")
    assert main(["solve", str(bad), "--segments", "1"]) == 3
    assert "line 3" in capsys.readouterr().err
