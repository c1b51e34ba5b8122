"""Command-line entry point: ``coarse <command> ...``.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .benchmarks import ab_test_policy, blanket, segment_then_personalize
from .bootstrap import bootstrap_second_step
from .calibrate import filter_population, fit_population, honest_validate, mean_r_squared
from .errors import ConfigurationError, DataError, DomainError, StructuralError
from .experiment import ExperimentSpec, _arms, run_experiment
from .granular import solve_granular
from .io import (load_arms, load_policy, load_population, parse_space, save_policy,
                 save_population, write_table)
from .lloyd import MenuCost, SolverConfig, round_policy_expost, solve, solve_menu
from .methods import DEFAULT_ARMS, METHODS, method_fn
from .oracle import grid_solve, refine_solve
from .surplus import surplus_decomposition
from .synth import PRESETS, generate_population, preset


def _space(args):
    if getattr(args, "upper_bounds", None):
        return parse_space(args.upper_bounds, args.unit_labels)
    return None


def _solver_args(p):
    p.add_argument("--segments", type=int, default=5, help="number of offered treatments L")
    p.add_argument("--starts", type=int, default=5)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--update", choices=("exact", "barycenter"), default="exact")
    p.add_argument("--round-step", type=float, default=0.0)
    p.add_argument("--menu-cost", default="none", help="none | linear:DELTA | quadratic:DELTA")
    p.add_argument("--allow-holdout", action="store_true")
    p.add_argument("--zero-intercept", action="store_true")


def _config(args) -> SolverConfig:
    return SolverConfig(num_treatments=args.segments, tolerance=args.tol,
                        max_iterations=args.max_iter, num_starts=args.starts,
                        update_rule=args.update, round_step=args.round_step,
                        menu_cost=MenuCost.parse(args.menu_cost), seed=args.seed,
                        allow_holdout=args.allow_holdout, zero_intercept=args.zero_intercept)


def _pop_args(p):
    p.add_argument("population", help="population CSV")
    p.add_argument("--upper-bounds", help="comma-separated upper bounds, e.g. 5,20")
    p.add_argument("--unit-labels", help="comma-separated unit labels")


def _common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--output", "-o")


def _print_report(report, space, policy):
    print(f"total_profit\t{report.total_profit!r}")
    print(f"granular_profit\t{report.granular_profit!r}")
    print(f"ratio_to_granular\t{report.ratio_to_granular!r}")
    print(f"total_regret\t{report.total_regret!r}")
    for seg in report.per_segment:
        label = "holdout" if seg.treatment is None else seg.treatment.label(space)
        print(f"segment\t{label}\t{seg.members}\t{seg.profit!r}")


def cmd_synth(args):
    overrides = {"n": args.n} if args.n else {}
    if args.covariates:
        overrides["covariates"] = args.covariates
    pop = generate_population(preset(args.preset, args.seed, **overrides))
    out = args.output or "population.csv"
    save_population(pop, out)
    t = solve_granular(pop).levels
    print(f"wrote {len(pop)} individuals to {out}")
    print("median optimal level per dimension\t" + "\t".join(repr(float(np.median(t[:, d])))
                                                           for d in range(pop.dims)))


def cmd_fit(args):
    data = load_arms(args.arms, _space(args))
    pop, fits = fit_population(data["ids"], data["arms"], data["cost_scale"], data["space"],
                               data["covariates"], data["covariate_names"])
    kept, dropped = filter_population(pop, args.beta_floor)
    out = args.output or "population.csv"
    save_population(kept, out)
    for d, r2 in enumerate(mean_r_squared(fits)):
        print(f"mean_r_squared_{d + 1}\t{r2!r}")
    print(f"kept\t{len(kept)}\ndropped\t{len(dropped)}")


def cmd_validate(args):
    data = load_arms(args.arms, _space(args))
    n = len(data["ids"])
    rng = np.random.default_rng(args.seed)
    rows = []
    for d, arms in enumerate(data["arms"]):
        if data["holdout"] is not None:
            hold = data["holdout"][:, d]
            members = np.flatnonzero(hold >= 0)
        else:
            hold = rng.integers(len(arms.levels), size=n)
            members = np.arange(n)
        if not members.size:
            continue
        sub = type(arms)(arms.levels, arms.values[members])
        res = honest_validate(sub, hold[members])
        print(f"dim {d + 1}\tcorrelation\t{res.correlation!r}\tmean_r_squared\t{res.mean_r_squared!r}")
        for i, p, o, lv in zip(members, res.predicted, res.observed, res.holdout_levels):
            rows.append([data["ids"][i], d + 1, float(lv), float(p), float(o)])
    if args.output:
        write_table(args.output, ["id", "dim", "level", "predicted", "observed"], rows)


def cmd_solve(args):
    pop = load_population(args.population, _space(args))
    config = _config(args)
    if args.menu_max:
        L, result, path = solve_menu(pop, args.menu_max, config)
        print(f"selected_L\t{L}")
    else:
        result = solve(pop, config)
    policy, report = result.policy, result.report
    if args.expost_step:
        policy, report, k = round_policy_expost(pop, policy, args.expost_step,
                                                allow_holdout=config.allow_holdout)
        print(f"effective_treatments\t{k}")
    _print_report(report, pop.space, policy)
    if args.output:
        save_policy(policy, args.output)
    if args.trace:
        Path(args.trace).write_text(result.trace.to_jsonl())


def cmd_oracle(args):
    pop = load_population(args.population, _space(args))
    if args.method == "grid":
        policy, report = grid_solve(pop, args.segments, args.grid_points)
    else:
        policy, report = refine_solve(pop, args.segments, seed=args.seed)
    _print_report(report, pop.space, policy)
    if args.output:
        save_policy(policy, args.output)


def cmd_benchmark(args):
    pop = load_population(args.population, _space(args))
    if args.method.startswith("kmeans-"):
        feature = args.method[len("kmeans-"):].replace("-", "_")
        policy, report = segment_then_personalize(pop, args.segments, feature, seed=args.seed)
    elif args.method == "abtest":
        arms = _arms(args.arms) if args.arms else DEFAULT_ARMS
        policy, report = ab_test_policy(pop, [a for a in arms if a.dim < pop.dims], args.segments)
    elif args.method == "blanket":
        if args.treatment:
            t = _arms(args.treatment)[0]
            t, report = blanket(pop, t.dim, t.value)
        else:
            t, report = blanket(pop)
        from .model import SegmentedPolicy
        policy = SegmentedPolicy.from_assignment([t], np.zeros(len(pop), dtype=np.int64),
                                                 {"method": "blanket"})
    else:
        raise ConfigurationError(f"unknown benchmark {args.method!r}")
    _print_report(report, pop.space, policy)
    if args.output:
        save_policy(policy, args.output)


def cmd_surplus(args):
    pop = load_population(args.population, _space(args))
    policy = load_policy(args.policy)
    rep = surplus_decomposition(pop, policy)
    o = rep.overall
    print(f"delta_cs\t{o.delta_cs!r}\ndelta_ps\t{o.delta_ps!r}\ndelta_ts\t{o.delta_ts!r}")
    if args.output:
        rows = []
        for g in rep.by_treatment + (o,):
            label = "all" if g is o else ("holdout" if g.treatment is None else g.treatment.label(pop.space))
            rows.append([label, g.members, g.delta_cs, g.delta_ps, g.delta_ts,
                         g.share_cs_positive, g.share_ps_positive, g.share_ts_positive])
        write_table(args.output, ["treatment", "members", "delta_cs", "delta_ps", "delta_ts",
                                  "share_cs_positive", "share_ps_positive", "share_ts_positive"], rows)


def cmd_bootstrap(args):
    pop = load_population(args.population, _space(args))
    config = _config(args)
    fn = method_fn(args.method, args.segments, config)
    res = bootstrap_second_step(pop, args.replicates, fn, args.seed, threads=args.threads)
    print(f"mean\t{res.mean!r}\nsd\t{res.sd!r}")
    if args.output:
        write_table(args.output, ["replicate", "profit", "granular_profit"],
                    [[b, float(p), float(g)] for b, (p, g) in enumerate(zip(res.replicates, res.granular))])


def cmd_experiment(args):
    spec = ExperimentSpec.load(args.spec)
    if args.seed is not None:
        spec = dataclasses.replace(spec, seed=args.seed)
    bundle = run_experiment(spec, threads=args.threads)
    out = args.output or "experiment_out"
    for path in bundle.write(out):
        print(path)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coarse", description="Coarse personalization via adapted Lloyd.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic population")
    p.add_argument("--preset", choices=sorted(PRESETS), default="small")
    p.add_argument("--n", type=int, default=0)
    p.add_argument("--covariates", choices=("linked", "unlinked", "none"))
    _common(p)
    p.set_defaults(func=cmd_synth)

    for name, func, helptext in (("fit", cmd_fit, "fit response curves from arm estimates"),
                                 ("validate", cmd_validate, "leave-one-arm-out validation")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("arms", help="arm-estimate CSV")
        p.add_argument("--upper-bounds")
        p.add_argument("--unit-labels")
        p.add_argument("--beta-floor", type=float, default=1e-6)
        _common(p)
        p.set_defaults(func=func)

    p = sub.add_parser("solve", help="adapted Lloyd solve")
    _pop_args(p)
    _solver_args(p)
    _common(p)
    p.add_argument("--menu-max", type=int, default=0, help="choose L in 1..MAX by net profit")
    p.add_argument("--expost-step", type=float, default=0.0)
    p.add_argument("--trace", help="write the chosen start's iterations as JSONL")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("oracle", help="grid or composition-refinement reference solve")
    _pop_args(p)
    _common(p)
    p.add_argument("--segments", type=int, default=3)
    p.add_argument("--method", choices=("grid", "refine"), default="grid")
    p.add_argument("--grid-points", type=int, default=41)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("benchmark", help="segment-then-personalize, A/B or blanket baselines")
    _pop_args(p)
    _common(p)
    p.add_argument("--segments", type=int, default=5)
    p.add_argument("--method", default="kmeans-optimal-levels",
                   choices=[m for m in METHODS if m != "coarse"])
    p.add_argument("--arms", help="comma list of DIM:LEVEL with 1-based DIM")
    p.add_argument("--treatment", help="fixed blanket DIM:LEVEL")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("surplus", help="surplus changes of a policy relative to granular")
    _pop_args(p)
    p.add_argument("policy")
    _common(p)
    p.set_defaults(func=cmd_surplus)

    p = sub.add_parser("bootstrap", help="second-step bootstrap of a method's profit")
    _pop_args(p)
    _solver_args(p)
    _common(p)
    p.add_argument("--method", choices=METHODS, default="coarse")
    p.add_argument("--replicates", type=int, default=100)
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("experiment", help="run an experiment spec and write the report bundle")
    p.add_argument("spec")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (DataError, DomainError, StructuralError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
