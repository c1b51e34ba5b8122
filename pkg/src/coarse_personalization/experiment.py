"""Experiment orchestration: profit-vs-L curves for every method, rounding
comparisons, surplus curves, solve traces and an optional bootstrap.

An experiment spec is a flat ``key = value`` text file; ``#`` starts a
comment. Output is a directory of CSV tables, a JSONL trace file and a
``manifest.json`` with the seed, the config hash and a hash of every file.
Thread count only changes how cells are scheduled, never the bundle.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bootstrap import bootstrap_second_step
from .errors import ConfigurationError
from .granular import solve_granular
from .io import dumps_json, fmt, load_population, parse_space
from .lloyd import MenuCost, SolverConfig, round_policy_expost, solve
from .methods import BENCHMARKS, METHODS, check_method, method_fn, run_method
from .model import FeasibleTreatment, Population
from .surplus import surplus_decomposition
from .synth import generate_population, preset

BUNDLE_VERSION = 1


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _arms(text: str) -> tuple[FeasibleTreatment, ...]:
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        dim, _, value = item.partition(":")
        out.append(FeasibleTreatment(int(dim) - 1, float(value)))
    return tuple(out)


@dataclass(frozen=True)
class ExperimentSpec:
    population: str = "synth"
    preset: str = "small"
    n: int = 0
    upper_bounds: str = ""
    seed: int = 0
    L_min: int = 1
    L_max: int = 10
    methods: tuple[str, ...] = METHODS
    arms: str = "1:2,1:3,1:4,1:5,2:5,2:10,2:15,2:20"
    ex_ante_steps: tuple[float, ...] = (1.0, 0.5, 0.25)
    ex_post_steps: tuple[float, ...] = (1.0, 0.5, 0.25)
    bootstrap: int = 0
    bootstrap_methods: tuple[str, ...] = ("coarse",)
    starts: int = 5
    update: str = "exact"
    tolerance: float = 1e-6
    max_iterations: int = 1000
    menu_cost: str = "none"
    allow_holdout: bool = False
    zero_intercept: bool = False
    kmeans_starts: int = 5
    status_quo: str = ""
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for m in self.methods + self.bootstrap_methods:
            check_method(m)
        if "coarse" not in self.methods:
            raise ConfigurationError("methods must include 'coarse'")
        if not 1 <= self.L_min <= self.L_max:
            raise ConfigurationError("need 1 <= L_min <= L_max")
        if self.bootstrap < 0:
            raise ConfigurationError("bootstrap must be non-negative")
        if any(s <= 0 for s in self.ex_ante_steps + self.ex_post_steps):
            raise ConfigurationError("rounding steps must be positive")
        try:
            _arms(self.arms)
        except ValueError as exc:
            raise ConfigurationError(f"bad arms {self.arms!r}") from exc
        self.solver_config()

    @classmethod
    def parse(cls, text: str) -> ExperimentSpec:
        kinds = {f.name: f.type for f in dataclasses.fields(cls) if f.name != "extra"}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if not sep or key not in kinds:
                raise ConfigurationError(f"line {lineno}: unknown or malformed entry {raw.strip()!r}")
            kind = kinds[key]
            try:
                if kind == "int":
                    values[key] = int(value)
                elif kind == "float":
                    values[key] = float(value)
                elif kind == "bool":
                    values[key] = value.lower() in ("1", "true", "yes", "on")
                elif kind == "tuple[float, ...]":
                    values[key] = _floats(value)
                elif kind == "tuple[str, ...]":
                    values[key] = tuple(v.strip() for v in value.split(",") if v.strip())
                else:
                    values[key] = value
            except ValueError as exc:
                raise ConfigurationError(f"line {lineno}: bad value for {key}: {value!r}") from exc
        return cls(**values)

    @classmethod
    def load(cls, path) -> ExperimentSpec:
        return cls.parse(Path(path).read_text())

    def as_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out.pop("extra")
        return {k: list(v) if isinstance(v, tuple) else v for k, v in out.items()}

    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.as_dict(), sort_keys=True).encode()).hexdigest()

    def solver_config(self) -> SolverConfig:
        return SolverConfig(num_treatments=1, tolerance=self.tolerance,
                            max_iterations=self.max_iterations, num_starts=self.starts,
                            update_rule=self.update, menu_cost=MenuCost.parse(self.menu_cost),
                            seed=self.seed, allow_holdout=self.allow_holdout,
                            zero_intercept=self.zero_intercept)

    def build_population(self) -> Population:
        if self.population == "synth":
            overrides = {"n": self.n} if self.n else {}
            return generate_population(preset(self.preset, self.seed, **overrides))
        space = parse_space(self.upper_bounds) if self.upper_bounds else None
        return load_population(self.population, space)


def population_hash(pop: Population) -> str:
    h = hashlib.sha256()
    h.update(json.dumps([pop.space.upper_bounds, pop.space.unit_labels]).encode())
    h.update("\n".join(map(str, pop.ids)).encode())
    for arr in (pop.alpha, pop.beta, pop.cost_scale):
        h.update(np.ascontiguousarray(arr).tobytes())
    if pop.covariates is not None:
        h.update(np.ascontiguousarray(pop.covariates).tobytes())
    return h.hexdigest()


@dataclass
class ReportBundle:
    tables: dict = field(default_factory=dict)      # name -> (header, rows)
    texts: dict = field(default_factory=dict)       # name -> str
    manifest: dict = field(default_factory=dict)

    def render(self) -> dict[str, str]:
        """File name -> exact file contents, manifest last."""
        import csv
        import io as _io
        files = {}
        for name, (header, rows) in self.tables.items():
            buf = _io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
            files[name] = buf.getvalue()
        files.update(self.texts)
        manifest = dict(self.manifest)
        manifest["files"] = {k: hashlib.sha256(v.encode()).hexdigest() for k, v in sorted(files.items())}
        files["manifest.json"] = dumps_json(manifest)
        return files

    def write(self, directory) -> list[Path]:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        out = []
        for name, text in self.render().items():
            path = directory / name
            path.write_text(text)
            out.append(path)
        return out

    def column(self, table: str, name: str) -> list:
        header, rows = self.tables[table]
        j = header.index(name)
        return [r[j] for r in rows]


def _map(fn, items, threads):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def run_experiment(spec: ExperimentSpec, threads: int = 1, population: Population | None = None) -> ReportBundle:
    pop = population if population is not None else spec.build_population()
    if spec.zero_intercept:
        pop = pop.zero_intercept()
    gran = solve_granular(pop)
    base = spec.solver_config()
    arms = tuple(a for a in _arms(spec.arms) if a.dim < pop.dims)
    Ls = list(range(spec.L_min, min(spec.L_max, len(pop)) + 1))
    benches = [m for m in spec.methods if m in BENCHMARKS]

    # benchmark cells are independent of each other
    cells = [(m, L) for m in benches for L in (Ls if m != "blanket" else Ls[:1])]

    def bench(cell):
        m, L = cell
        return run_method(pop, m, L, base, arms=arms, kmeans_starts=spec.kmeans_starts, granular=gran)

    bench_out = dict(zip(cells, _map(bench, cells, threads)))

    def bench_at(m, L):
        return bench_out[(m, Ls[0] if m == "blanket" else L)]

    # coarse path: warm-started in L and seeded with every benchmark menu
    seeds = {L: [list(bench_at(m, L)[0].treatments) for m in benches] for L in Ls}
    coarse = {}
    warm = None
    for L in Ls:
        res = solve(pop, base.replace(num_treatments=L), warm, seeds[L], gran)
        coarse[L] = res
        warm = res.policy

    tables = {}
    header = ["L", "granular_profit"]
    for m in spec.methods:
        header += [f"{m}_profit", f"{m}_ratio"]
    rows = []
    for L in Ls:
        row = [L, float(gran.total)]
        for m in spec.methods:
            rep = coarse[L].report if m == "coarse" else bench_at(m, L)[1]
            row += [rep.total_profit, rep.ratio_to_granular]
        rows.append(row)
    tables["profit_vs_L.csv"] = (header, rows)

    menu_rows = []
    for L in Ls:
        for m in spec.methods:
            policy = coarse[L].policy if m == "coarse" else bench_at(m, L)[0]
            for slot, (t, mass) in enumerate(zip(policy.treatments, policy.masses)):
                menu_rows.append([L, m, slot, t.dim + 1, pop.space.unit_labels[t.dim], t.value, float(mass)])
    tables["menus.csv"] = (["L", "method", "slot", "dim", "unit", "value", "mass"], menu_rows)

    if spec.status_quo:
        sq = _arms(spec.status_quo)[0]
        from .benchmarks import blanket
        _, rep = blanket(pop, sq.dim, sq.value, gran.best_return)
        tables["status_quo.csv"] = (["dim", "value", "profit", "ratio"],
                                    [[sq.dim + 1, sq.value, rep.total_profit, rep.ratio_to_granular]])

    # rounding: coarse grids first, each finer run seeded with the coarser result
    steps = sorted(set(spec.ex_ante_steps), reverse=True)

    def ex_ante(L):
        out, prev = [], []
        for step in steps:
            res = solve(pop, base.replace(num_treatments=L, round_step=step), None,
                        seeds[L] + prev, gran)
            prev = [list(res.policy.treatments)]
            out.append((step, res))
        return out

    ante = dict(zip(Ls, _map(ex_ante, Ls, threads)))
    round_rows = []
    for L in Ls:
        for step, res in ante[L]:
            round_rows.append([L, "ex-ante", step, res.report.total_profit, res.report.ratio_to_granular,
                               len(set(res.policy.treatments))])
        for step in spec.ex_post_steps:
            _, rep, k = round_policy_expost(pop, coarse[L].policy, step, gran.best_return,
                                            spec.allow_holdout)
            round_rows.append([L, "ex-post", step, rep.total_profit, rep.ratio_to_granular, k])
    tables["rounding.csv"] = (["L", "mode", "step", "profit", "ratio", "effective_treatments"], round_rows)

    surplus_rows, group_rows = [], []
    for L in Ls:
        s = surplus_decomposition(pop, coarse[L].policy, gran)
        o = s.overall
        surplus_rows.append([L, o.delta_cs, o.delta_ps, o.delta_ts,
                             o.share_cs_positive, o.share_ps_positive, o.share_ts_positive])
        for g in s.by_treatment:
            label = "holdout" if g.treatment is None else g.treatment.label(pop.space)
            group_rows.append([L, label, g.members, g.delta_cs, g.delta_ps, g.delta_ts,
                               g.share_cs_positive, g.share_ps_positive, g.share_ts_positive])
    shares = ["share_cs_positive", "share_ps_positive", "share_ts_positive"]
    tables["surplus_vs_L.csv"] = (["L", "delta_cs", "delta_ps", "delta_ts"] + shares, surplus_rows)
    tables["surplus_by_treatment.csv"] = (["L", "treatment", "members", "delta_cs", "delta_ps",
                                           "delta_ts"] + shares, group_rows)

    trace_lines = []
    for L in Ls:
        for rec in coarse[L].trace.records():
            trace_lines.append(json.dumps({"L": L, **rec}, sort_keys=True))
    texts = {"traces.jsonl": "".join(line + "\n" for line in trace_lines)}

    boot_seeds = {}
    if spec.bootstrap:
        rep_rows, sum_rows = [], []
        for m in spec.bootstrap_methods:
            for L in Ls if m != "blanket" else Ls[:1]:
                bseed = int(np.random.SeedSequence([spec.seed, METHODS.index(m), L]).generate_state(1)[0])
                boot_seeds[f"{m}:L={L}"] = bseed
                fn = method_fn(m, L, base, arms=arms, kmeans_starts=spec.kmeans_starts)
                res = bootstrap_second_step(pop, spec.bootstrap, fn, bseed, threads=threads)
                for b, (p, g) in enumerate(zip(res.replicates, res.granular)):
                    rep_rows.append([m, L, b, float(p), float(g)])
                sum_rows.append([m, L, spec.bootstrap, res.mean, res.sd, float(np.mean(res.ratios))])
        tables["bootstrap.csv"] = (["method", "L", "replicate", "profit", "granular_profit"], rep_rows)
        tables["bootstrap_summary.csv"] = (["method", "L", "B", "mean", "sd", "mean_ratio"], sum_rows)

    headline = None
    if 5 in coarse:
        headline = {"L": 5, "coarse_ratio": coarse[5].report.ratio_to_granular, "asserted": False}
    manifest = {
        "bundle_version": BUNDLE_VERSION,
        "spec": spec.as_dict(),
        "config_sha256": spec.config_hash(),
        "seed": spec.seed,
        "solver": base.as_dict(),
        "population": {"source": spec.population, "n": len(pop), "dims": pop.dims,
                       "sha256": population_hash(pop)},
        "bootstrap_seeds": boot_seeds,
        "coarse_starts": {str(L): {"start": coarse[L].policy.meta["start"],
                                   "seed_kind": coarse[L].policy.meta["seed_kind"],
                                   "termination": coarse[L].policy.meta["termination"]} for L in Ls},
        "headline": headline,
    }
    return ReportBundle(tables, texts, manifest)
