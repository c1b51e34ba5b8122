"""Adapted Lloyd iteration for coarse personalization.

Each iteration

1. assigns every individual to the offered treatment with the highest
   profit for her (equivalently, the lowest regret),
2. computes a candidate D-vector per cell: the mean of the members'
   per-dimension optimal levels (``barycenter``), or the cell's own
   profit-maximizing level in each dimension (``exact``),
3. keeps, per cell, the single dimension whose candidate earns the cell the
   most profit.

Several starts are run and the most profitable policy is kept. Within a
start the best state seen is returned, so a seed's own profit is a lower
bound on the result.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, StructuralError
from .granular import (CellSums, GranularSolution, best_cell_treatments, cell_sums, optimal_level,
                       solve_granular)
from .model import (HOLDOUT, FeasibleTreatment, Population, ProfitReport, SegmentedPolicy,
                    policy_profit, profit_at)

UPDATE_RULES = ("barycenter", "exact")
MENU_COST_KINDS = ("none", "linear", "quadratic")
_KMEANS_SEED_ROWS = 100_000


@dataclass(frozen=True)
class MenuCost:
    """Cost of issuing L distinct treatments: 0, ``delta*L`` or ``delta*L**2``."""

    kind: str = "none"
    delta: float = 0.0

    def __post_init__(self):
        if self.kind not in MENU_COST_KINDS:
            raise ConfigurationError(f"menu cost kind must be one of {MENU_COST_KINDS}")
        if self.delta < 0:
            raise ConfigurationError("menu cost delta must be non-negative")

    def __call__(self, L: int) -> float:
        if self.kind == "linear":
            return self.delta * L
        if self.kind == "quadratic":
            return self.delta * L * L
        return 0.0

    @classmethod
    def parse(cls, text: str) -> MenuCost:
        """``none``, ``linear:0.5`` or ``quadratic:0.01``."""
        kind, _, delta = text.partition(":")
        try:
            return cls(kind.strip() or "none", float(delta) if delta else 0.0)
        except ValueError as exc:
            raise ConfigurationError(f"bad menu cost {text!r}") from exc

    def __str__(self):
        return self.kind if self.kind == "none" else f"{self.kind}:{self.delta!r}"


@dataclass(frozen=True)
class SolverConfig:
    num_treatments: int = 5
    tolerance: float = 1e-6
    max_iterations: int = 1000
    num_starts: int = 5
    update_rule: str = "exact"
    round_step: float = 0.0
    menu_cost: MenuCost = MenuCost()
    seed: int = 0
    allow_holdout: bool = False
    zero_intercept: bool = False
    polish_limit: int = 1000

    def __post_init__(self):
        if self.num_treatments < 1:
            raise ConfigurationError("num_treatments must be at least 1")
        if not self.tolerance > 0:
            raise ConfigurationError("tolerance must be positive")
        if self.max_iterations < 1 or self.num_starts < 1:
            raise ConfigurationError("max_iterations and num_starts must be at least 1")
        if self.update_rule not in UPDATE_RULES:
            raise ConfigurationError(f"update_rule must be one of {UPDATE_RULES}")
        if not self.round_step >= 0:
            raise ConfigurationError("round_step must be non-negative")
        if self.polish_limit < 0:
            raise ConfigurationError("polish_limit must be non-negative")
        if isinstance(self.menu_cost, str):
            object.__setattr__(self, "menu_cost", MenuCost.parse(self.menu_cost))

    def replace(self, **changes) -> SolverConfig:
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["menu_cost"] = str(self.menu_cost)
        return out


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    treatments: tuple[FeasibleTreatment, ...]
    objective: float
    total_profit: float
    counts: tuple[int, ...]


@dataclass(frozen=True)
class SolveTrace:
    start: int
    seed_kind: str
    iterations: tuple[IterationRecord, ...]
    termination: str

    def records(self) -> list[dict]:
        """Plain dicts, one per iteration, for line-delimited export."""
        return [{
            "start": self.start,
            "seed_kind": self.seed_kind,
            "iteration": rec.iteration,
            "treatments": [[t.dim, t.value] for t in rec.treatments],
            "objective": rec.objective,
            "total_profit": rec.total_profit,
            "counts": list(rec.counts),
            "termination": self.termination,
        } for rec in self.iterations]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records())


@dataclass(frozen=True, eq=False)
class SolveResult:
    policy: SegmentedPolicy
    report: ProfitReport
    trace: SolveTrace
    traces: tuple[SolveTrace, ...] = ()
    start_profits: tuple[float, ...] = ()

    @property
    def treatments(self):
        return self.policy.treatments


# ---- rounding ----------------------------------------------------------------

def _grid_top(step: float, upper) -> np.ndarray:
    return np.floor(np.asarray(upper) / step + 1e-9) * step


def round_to_step(values, step: float, upper) -> np.ndarray:
    """Nearest multiple of ``step`` (halves away from zero), kept inside ``[0, upper]``."""
    values = np.asarray(values, dtype=float)
    out = np.floor(values / step + 0.5) * step
    return np.clip(out, 0.0, np.minimum(_grid_top(step, upper), upper))


def _best_grid_level(sums_a, sums_b, sums_s, level, step, upper):
    """Better of the two grid neighbours of a concave optimum."""
    top = np.minimum(_grid_top(step, upper), upper)
    lo = np.clip(np.floor(level / step + 1e-9) * step, 0.0, top)
    hi = np.clip(lo + step, 0.0, top)
    p_lo = sums_a + sums_b * np.log1p(lo) - sums_s * lo
    p_hi = sums_a + sums_b * np.log1p(hi) - sums_s * hi
    return np.where(p_hi > p_lo, hi, lo)


# ---- public building blocks --------------------------------------------------

def _profits_best(pop: Population, treatments: Sequence[FeasibleTreatment], allow_holdout=False):
    """Best offer per individual. Returns ``(labels, best_profit)``.

    Ties go to the lowest offer index.
    """
    a, b, s = pop.columns
    n = len(pop)
    labels = np.zeros(n, dtype=np.int64)
    best = np.empty(n)
    p = np.empty(n)
    for l, t in enumerate(treatments):
        d, v = t.dim, t.value
        # same operation order as profit_at, so values agree bit for bit
        np.multiply(b[d], np.log1p(v), out=p)
        p += a[d]
        p -= s[d] * v
        if l == 0:
            best[:] = p
            continue
        better = p > best
        labels[better] = l
        np.maximum(best, p, out=best)
    if allow_holdout:
        neg = best < 0
        labels[neg] = HOLDOUT
        best[neg] = 0.0
    return labels, best


def assign(pop: Population, treatments: Sequence[FeasibleTreatment], allow_holdout: bool = False):
    """Voronoi cells: map each individual to her most profitable offer.

    Returns ``(assignment, masses)``.
    """
    if not treatments:
        raise StructuralError("at least one treatment must be offered")
    labels, _ = _profits_best(pop, treatments, allow_holdout)
    n = len(pop)
    counts = np.bincount(labels[labels >= 0], minlength=len(treatments))
    return labels, (counts / n if n else np.zeros(len(treatments)))


def barycenter_update(pop: Population, members, granular: GranularSolution | None = None) -> np.ndarray:
    """Mean of the members' per-dimension optimal levels."""
    members = np.asarray(members)
    if members.dtype == bool:
        members = np.flatnonzero(members)
    if not members.size:
        raise StructuralError("barycenter of an empty cell")
    levels = (granular or solve_granular(pop)).levels
    return levels[members].mean(axis=0)


def _reduce(sums: CellSums, candidates: np.ndarray, bounds, rule: str, step: float):
    """Pick one dimension per cell. Returns ``(dims, levels)``."""
    if rule == "exact":
        candidates = sums.optimal_levels(bounds)
        if step:
            candidates = _best_grid_level(sums.alpha, sums.beta, sums.cost, candidates, step, bounds)
    elif step:
        candidates = round_to_step(candidates, step, bounds)
    profits = sums.profit(candidates)
    dims = np.argmax(profits, axis=1)
    return dims, candidates[np.arange(len(dims)), dims]


def reduce_dimension(pop: Population, members, candidate, update_rule: str = "barycenter",
                     round_step: float = 0.0) -> FeasibleTreatment:
    """Project a cell's candidate D-vector onto its most profitable dimension."""
    labels = np.full(len(pop), -1, dtype=np.int64)
    labels[np.asarray(members)] = 0
    sums = cell_sums(pop, labels, 1)
    cand = np.asarray(candidate, dtype=float).reshape(1, pop.dims)
    dims, levels = _reduce(sums, cand, pop.space.bounds, update_rule, round_step)
    return FeasibleTreatment(int(dims[0]), float(levels[0]))


# ---- solver ------------------------------------------------------------------

class _Run:
    """State shared by all starts of one solve."""

    def __init__(self, pop: Population, config: SolverConfig, granular: GranularSolution):
        self.pop = pop
        self.config = config
        self.L = config.num_treatments
        self.gran = granular
        self.bounds = pop.space.bounds
        self.step = config.round_step
        rbar = granular.best_return
        self.benchmark = np.maximum(rbar, 0.0) if config.allow_holdout else rbar

    # treatments ----------------------------------------------------------
    def _round(self, t: FeasibleTreatment) -> FeasibleTreatment:
        if not self.step:
            return t
        v = float(round_to_step(t.value, self.step, self.bounds[t.dim]))
        return FeasibleTreatment(t.dim, v)

    def _clip(self, t: FeasibleTreatment) -> FeasibleTreatment:
        return FeasibleTreatment(t.dim, min(max(t.value, 0.0), self.bounds[t.dim]))

    def _perturb(self, t: FeasibleTreatment, taken: set) -> FeasibleTreatment:
        for d in [t.dim] + [d for d in range(self.pop.dims) if d != t.dim]:
            ub = self.bounds[d]
            delta = self.step if self.step else 1e-3 * ub
            base = t.value if d == t.dim else 0.0
            for j in range(1, 10_000):
                for v in (base + j * delta, base - j * delta):
                    if 0.0 <= v <= ub:
                        cand = self._round(FeasibleTreatment(d, v))
                        if cand not in taken:
                            return cand
                if base + j * delta > ub and base - j * delta < 0:
                    break
        raise ConfigurationError("cannot find enough distinct treatments on the rounding grid")

    def _granular_offer(self, i: int) -> FeasibleTreatment:
        return self._round(self.gran.treatment(i))

    def normalize(self, treatments: Iterable[FeasibleTreatment]) -> list[FeasibleTreatment]:
        """Clip, round, de-duplicate and pad to exactly L treatments."""
        out: list[FeasibleTreatment] = []
        taken: set = set()
        for t in treatments:
            if len(out) == self.L:
                break
            t = self._round(self._clip(t))
            if t in taken:
                t = self._perturb(t, taken)
            out.append(t)
            taken.add(t)
        if len(out) < self.L:
            if out:
                _, cur = _profits_best(self.pop, out)
            else:
                cur = np.full(len(self.pop), -np.inf)
            while len(out) < self.L:
                t = None
                reg = self.benchmark - cur
                i = int(np.argmax(reg))
                if reg[i] > 1e-12:
                    cand = self._granular_offer(i)
                    if cand not in taken:
                        t = cand
                if t is None:
                    t = self._perturb(out[-1] if out else self._granular_offer(0), taken)
                out.append(t)
                taken.add(t)
                cur = np.maximum(cur, profit_at(self.pop, t.dim, t.value))
        return out

    # seeds -----------------------------------------------------------------
    def spread_seed(self, rng) -> list[FeasibleTreatment]:
        from .benchmarks import kmeans_plus_plus
        n = len(self.pop)
        emb = np.zeros((n, self.pop.dims))
        emb[np.arange(n), self.gran.best_dim] = self.gran.best_level / self.bounds[self.gran.best_dim]
        idx = kmeans_plus_plus(emb, min(self.L, n), rng)
        return [self.gran.treatment(int(i)) for i in idx]

    def random_seed(self, rng) -> list[FeasibleTreatment]:
        dims = rng.integers(self.pop.dims, size=self.L)
        return [FeasibleTreatment(int(d), float(rng.uniform(0.0, self.bounds[d]))) for d in dims]

    def warm_seed(self, warm: SegmentedPolicy) -> list[FeasibleTreatment]:
        """Previous solution plus a split of its largest cell."""
        base = list(warm.treatments)[: self.L]
        if len(base) < self.L and len(warm.assignment) == len(self.pop):
            counts = warm.counts()
            big = int(np.argmax(counts))
            members = np.flatnonzero(warm.assignment == big)
            if members.size:
                t = warm.treatments[big]
                reg = self.benchmark[members] - profit_at(self.pop, t.dim, t.value, members)
                base.append(self.gran.treatment(int(members[np.argmax(reg)])))
        return base

    def greedy_seed(self) -> list[FeasibleTreatment]:
        """Optimal blanket; ``normalize`` then adds highest-regret offers one by one."""
        sums = cell_sums(self.pop, np.zeros(len(self.pop), dtype=np.int64), 1)
        return best_cell_treatments(sums, self.bounds)

    def swap_seed(self, T, rank: int) -> list[FeasibleTreatment]:
        """Drop the offer whose removal costs least (``rank``-th least after
        failed swaps); ``normalize`` refills the slot with the granular offer
        of the individual left with the highest regret."""
        losses = []
        for l in range(len(T)):
            _, best = _profits_best(self.pop, T[:l] + T[l + 1:], self.config.allow_holdout)
            losses.append((-float(best.sum()), l))
        drop = sorted(losses)[rank % len(T)][1]
        return T[:drop] + T[drop + 1:]

    def kmeans_seed(self, rng) -> list[FeasibleTreatment]:
        """Cell optima of a k-means partition of the granular levels (subsampled when large)."""
        from .benchmarks import kmeans
        n = len(self.pop)
        rows = np.arange(n)
        if n > _KMEANS_SEED_ROWS:
            rows = np.sort(rng.choice(n, _KMEANS_SEED_ROWS, replace=False))
        sub = self.pop.take(rows)
        levels = self.gran.levels[rows]
        k = min(self.L, len(np.unique(levels, axis=0)))
        km = kmeans(levels, k, starts=1, seed=int(rng.integers(2**31)))
        return best_cell_treatments(cell_sums(sub, km.labels, k), self.bounds)

    # iteration -------------------------------------------------------------
    def _reseed_empty(self, T, labels, best):
        counts = np.bincount(labels[labels >= 0], minlength=len(T))
        empty = np.flatnonzero(counts == 0)
        if not empty.size:
            return T, labels, best
        T = list(T)
        taken = set(T)
        for l in empty:
            reg = self.benchmark - best
            i = int(np.argmax(reg))
            if reg[i] <= 1e-12:
                break
            cand = self._granular_offer(i)
            if cand in taken:
                continue
            taken.discard(T[l])
            T[l] = cand
            taken.add(cand)
            p = profit_at(self.pop, cand.dim, cand.value)
            better = p > best
            best = np.where(better, p, best)
            labels = np.where(better, l, labels)
        return T, labels, best

    def update(self, T, labels):
        sums = cell_sums(self.pop, labels, len(T))
        if self.config.update_rule == "barycenter":
            keep = labels >= 0
            cand = np.stack([
                np.bincount(labels[keep], weights=self.gran.levels[keep, d], minlength=len(T))
                for d in range(self.pop.dims)], axis=1)
            with np.errstate(invalid="ignore", divide="ignore"):
                cand = cand / sums.counts[:, None]
            cand = np.nan_to_num(cand)
        else:
            cand = None
        dims, levels = _reduce(sums, cand, self.bounds, self.config.update_rule, self.step)
        return [FeasibleTreatment(int(d), float(v)) if sums.counts[l] else T[l]
                for l, (d, v) in enumerate(zip(dims, levels))]

    def evaluate(self, labels, best):
        reg = np.maximum(self.benchmark - best, 0.0)
        counts = np.bincount(labels[labels >= 0], minlength=self.L)
        return float(best.sum()), float(np.dot(reg, reg)), tuple(int(c) for c in counts)

    def run(self, start: int, kind: str, seed_treatments) -> tuple:
        cfg = self.config
        T = self.normalize(seed_treatments)
        records = []
        best_state = None
        prev_T, prev_labels = None, None
        termination = "iteration-cap"
        for it in range(1, cfg.max_iterations + 1):
            labels, best = _profits_best(self.pop, T, cfg.allow_holdout)
            T, labels, best = self._reseed_empty(T, labels, best)
            profit, sq, counts = self.evaluate(labels, best)
            records.append(IterationRecord(it, tuple(T), sq + cfg.menu_cost(self.L), profit, counts))
            if best_state is None or profit >= best_state[0]:
                best_state = (profit, list(T), labels)
            if prev_T is not None and self._converged(prev_T, T, prev_labels, labels):
                moved = self.polish(labels) if self._can_polish() else None
                if moved is None:
                    termination = "converged"
                    break
                labels = moved
            prev_T, prev_labels = T, labels
            T = self.update(T, labels)
        trace = SolveTrace(start, kind, tuple(records), termination)
        return best_state, trace

    def _can_polish(self) -> bool:
        cfg = self.config
        return (cfg.update_rule == "exact" and not self.step and not cfg.allow_holdout
                and 1 < self.L < len(self.pop) <= cfg.polish_limit)

    def _cell_value(self, A, B, S):
        """Best single-treatment profit of cells with summed parameters ``(..., D)``."""
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(S > 0, optimal_level(B, S, self.bounds), 0.0)
        return np.max(A + B * np.log1p(t) - S * t, axis=-1)

    def polish(self, labels):
        """Single-individual moves between cells, each cell re-optimized in
        closed form, while a move raises total profit. Returns the new
        labels, or None when no move helps."""
        pop = self.pop
        a, b, s = pop.alpha, pop.beta, pop.cost_scale
        labels = labels.copy()
        sums = cell_sums(pop, labels, self.L)
        A, B, S, counts = sums.alpha.copy(), sums.beta.copy(), sums.cost.copy(), sums.counts.copy()
        rows = np.arange(len(pop))
        moved = False
        for _ in range(2 * len(pop)):
            v = self._cell_value(A, B, S)
            la = labels
            rem = self._cell_value(A[la] - a, B[la] - b, S[la] - s)
            add = self._cell_value(A[None] + a[:, None], B[None] + b[:, None], S[None] + s[:, None])
            gain = (rem - v[la])[:, None] + add - v[None, :]
            gain[counts[la] == 1, :] = -np.inf
            gain[rows, la] = -np.inf
            i, k = np.unravel_index(int(np.argmax(gain)), gain.shape)
            if not gain[i, k] > 1e-12 * max(1.0, abs(float(v.sum()))):
                break
            j = la[i]
            A[j] -= a[i]; B[j] -= b[i]; S[j] -= s[i]; counts[j] -= 1
            A[k] += a[i]; B[k] += b[i]; S[k] += s[i]; counts[k] += 1
            labels[i] = k
            moved = True
        return labels if moved else None

    def _converged(self, prev_T, T, prev_labels, labels) -> bool:
        if any(a.dim != b.dim for a, b in zip(prev_T, T)):
            return False
        change = max(abs(a.value - b.value) for a, b in zip(prev_T, T))
        if change >= self.config.tolerance:
            return False
        # exact mode also waits for a stable partition, so the offered level
        # is the optimum of the cell it is reported with
        return self.config.update_rule != "exact" or np.array_equal(prev_labels, labels)


def _start_plan(config: SolverConfig, warm_start, extra_seeds):
    """Seeded starts first, then swap restarts that perturb the incumbent."""
    kinds = ["spread"] + (["warm"] if warm_start is not None else []) + ["greedy", "kmeans-levels"]
    kinds = kinds[: config.num_starts]
    swaps = ["swap" if j % 2 == 0 else "random" for j in range(config.num_starts - len(kinds))]
    return kinds + [f"seed{j}" for j in range(len(extra_seeds))] + swaps


def solve(pop: Population, config: SolverConfig, warm_start: SegmentedPolicy | None = None,
          extra_seeds: Sequence[Sequence[FeasibleTreatment]] = (),
          granular: GranularSolution | None = None) -> SolveResult:
    """Best-of-starts adapted Lloyd solution with ``config.num_treatments`` offers.

    ``warm_start`` (typically the L-1 solution) seeds the second start;
    ``extra_seeds`` are additional starting menus, each run as its own start.
    """
    if config.zero_intercept:
        pop = pop.zero_intercept()
        granular = None
    n = len(pop)
    if n == 0:
        raise ConfigurationError("cannot solve on an empty population")
    if config.num_treatments > n:
        raise ConfigurationError(f"L={config.num_treatments} exceeds the population size {n}")
    gran = granular or solve_granular(pop)
    run = _Run(pop, config, gran)
    extra_seeds = [list(s) for s in extra_seeds]
    kinds = _start_plan(config, warm_start, extra_seeds)
    streams = np.random.SeedSequence(config.seed).spawn(len(kinds))

    results = []
    incumbent, swaps_tried = None, 0
    for start, (kind, ss) in enumerate(zip(kinds, streams)):
        rng = np.random.default_rng(ss)
        if kind == "swap":
            seed = run.swap_seed(incumbent[1], swaps_tried) if run.L > 1 else run.random_seed(rng)
            swaps_tried += 1
        elif kind == "spread":
            seed = run.spread_seed(rng)
        elif kind == "warm":
            seed = run.warm_seed(warm_start)
        elif kind == "greedy":
            seed = run.greedy_seed()
        elif kind == "kmeans-levels":
            seed = run.kmeans_seed(rng)
        elif kind == "random":
            seed = run.random_seed(rng)
        else:
            seed = extra_seeds[int(kind[4:])]
        results.append(run.run(start, kind, seed))
        state = results[-1][0]
        if incumbent is None or state[0] > incumbent[0]:
            incumbent, swaps_tried = state, 0

    best_idx = 0
    for j, (state, _) in enumerate(results):
        if state[0] > results[best_idx][0][0]:
            best_idx = j
    (profit, T, labels), trace = results[best_idx]

    if len(set(T)) < len(T):
        T = run.normalize(T)
        labels, _ = _profits_best(pop, T, config.allow_holdout)

    meta = {"config": config.as_dict(), "seed": config.seed, "start": best_idx,
            "seed_kind": trace.seed_kind, "termination": trace.termination}
    policy = SegmentedPolicy.from_assignment(T, labels, meta)
    report = policy_profit(pop, policy, run.benchmark, config.menu_cost(config.num_treatments))
    return SolveResult(policy, report, trace, tuple(t for _, t in results),
                       tuple(s[0] for s, _ in results))


def solve_path(pop: Population, L_max: int, config: SolverConfig,
               extra_seeds: dict | None = None) -> list[SolveResult]:
    """Solutions for L = 1..L_max, each warm-started from the previous one."""
    if L_max < 1:
        raise ConfigurationError("L_max must be at least 1")
    gran = None if config.zero_intercept else solve_granular(pop)
    out: list[SolveResult] = []
    for L in range(1, L_max + 1):
        seeds = (extra_seeds or {}).get(L, ())
        warm = out[-1].policy if out else None
        out.append(solve(pop, config.replace(num_treatments=L), warm, seeds, gran))
    return out


def solve_menu(pop: Population, L_max: int, config: SolverConfig):
    """Pick the number of offers maximizing ``profit - menu_cost(L)``.

    Returns ``(L_star, result, path)``; ties go to the smaller L.
    """
    path = solve_path(pop, L_max, config)
    net = [r.report.total_profit - config.menu_cost(L) for L, r in enumerate(path, start=1)]
    j = int(np.argmax(net))
    return j + 1, path[j], path


def round_policy_expost(pop: Population, policy: SegmentedPolicy, step: float,
                        best_return=None, allow_holdout: bool = False):
    """Round converged levels to ``step``, merge collisions and reassign.

    Returns ``(policy, report, effective_count)``.
    """
    if not step > 0:
        raise ConfigurationError("rounding step must be positive")
    bounds = pop.space.bounds
    merged: list[FeasibleTreatment] = []
    for t in policy.treatments:
        r = FeasibleTreatment(t.dim, float(round_to_step(t.value, step, bounds[t.dim])))
        if r not in merged:
            merged.append(r)
    labels, _ = assign(pop, merged, allow_holdout)
    meta = dict(policy.meta, expost_step=step)
    rounded = SegmentedPolicy.from_assignment(merged, labels, meta)
    report = policy_profit(pop, rounded, best_return)
    return rounded, report, len(merged)


@dataclass(frozen=True)
class FocResidual:
    segment: int
    treatment: FeasibleTreatment
    status: str            # interior | boundary | empty
    residual: float | None


def foc_residual(pop: Population, policy: SegmentedPolicy) -> list[FocResidual]:
    """Averaged first-order condition per segment.

    For an interior level t in dimension d the residual is
    ``|sum(beta)/(1+t) - sum(s)| / sum(s)`` over the segment's members.
    """
    sums = cell_sums(pop, policy.assignment, policy.num_treatments)
    out = []
    for l, t in enumerate(policy.treatments):
        if sums.counts[l] == 0:
            out.append(FocResidual(l, t, "empty", None))
            continue
        if not (0.0 < t.value < pop.space.upper_bounds[t.dim]):
            out.append(FocResidual(l, t, "boundary", None))
            continue
        b, s = sums.beta[l, t.dim], sums.cost[l, t.dim]
        out.append(FocResidual(l, t, "interior", abs(b / (1.0 + t.value) - s) / s))
    return out


def within_dimension_order_violations(pop: Population, policy: SegmentedPolicy) -> int:
    """Count breaks of the beta/s threshold structure inside each dimension.

    Sorting the individuals served in dimension d by ``beta/s`` must give a
    non-decreasing sequence of assigned levels.
    """
    violations = 0
    values = np.array([t.value for t in policy.treatments])
    dims = np.array([t.dim for t in policy.treatments])
    a = policy.assignment
    for d in range(pop.dims):
        rows = np.flatnonzero((a >= 0) & (dims[np.maximum(a, 0)] == d))
        if rows.size < 2:
            continue
        ratio = pop.beta[rows, d] / pop.cost_scale[rows, d]
        order = np.lexsort((values[a[rows]], ratio))
        seq = values[a[rows]][order]
        violations += int(np.count_nonzero(np.diff(seq) < 0))
    return violations

