"""Discretize-then-personalize baselines.

* k-means on covariates, preferences (beta) or granular optimal levels,
  followed by the profit-maximizing treatment for each cluster;
* A/B-testing policies that choose the best L-subset of experimental arms;
* blanket treatments, fixed or optimized.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, EnumerationCapError
from .granular import best_cell_treatments, cell_sums, solve_granular
from .model import FeasibleTreatment, Population, SegmentedPolicy, policy_profit, profit_matrix

FEATURES = ("covariates", "preferences", "optimal_levels")


@dataclass(frozen=True, eq=False)
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    wcss: float
    iterations: int


def _sq_dist(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    out = np.empty((len(points), len(centers)))
    for j, c in enumerate(centers):
        diff = points - c
        out[:, j] = np.einsum("ij,ij->i", diff, diff)
    return out


def kmeans_plus_plus(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Indices of ``k`` seeds drawn by D^2 sampling."""
    n = len(points)
    chosen = [int(rng.integers(n))]
    d2 = np.einsum("ij,ij->i", points - points[chosen[0]], points - points[chosen[0]])
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            # every remaining point coincides with a seed
            chosen.append(int(rng.integers(n)))
            continue
        nxt = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
        nxt = min(nxt, n - 1)
        chosen.append(nxt)
        diff = points - points[nxt]
        d2 = np.minimum(d2, np.einsum("ij,ij->i", diff, diff))
    return np.asarray(chosen)


def _lloyd(points, centers, max_iter):
    labels = None
    it = 0
    for it in range(1, max_iter + 1):
        d2 = _sq_dist(points, centers)
        new = np.argmin(d2, axis=1)
        counts = np.bincount(new, minlength=len(centers))
        for j in np.flatnonzero(counts == 0):
            # reseed an empty cluster at the point farthest from its center
            far = int(np.argmax(d2[np.arange(len(points)), new]))
            new[far] = j
            d2[far, :] = 0.0
            counts = np.bincount(new, minlength=len(centers))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        centers = np.stack([
            np.bincount(labels, weights=points[:, c], minlength=len(centers)) / counts
            for c in range(points.shape[1])], axis=1)
    d2 = _sq_dist(points, centers)
    wcss = float(d2[np.arange(len(points)), labels].sum())
    return labels, centers, wcss, it


def kmeans(points, k: int, starts: int = 5, seed: int = 0, max_iter: int = 300,
           init=None) -> KMeansResult:
    """Euclidean k-means, best of ``starts`` k-means++ initializations by WCSS.

    ``init`` fixes the initial centers (and forces a single start).
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points.reshape(-1, 1)
    if k < 1:
        raise ConfigurationError("k must be at least 1")
    distinct = len(np.unique(points, axis=0))
    if k > distinct:
        raise ConfigurationError(f"k={k} exceeds the {distinct} distinct points")
    if init is not None:
        inits = [np.asarray(init, dtype=float).reshape(k, points.shape[1])]
    else:
        rng = np.random.default_rng(seed)
        inits = [points[kmeans_plus_plus(points, k, rng)] for _ in range(max(starts, 1))]
    best = None
    for centers in inits:
        labels, centers, wcss, it = _lloyd(points, centers.copy(), max_iter)
        if best is None or wcss < best.wcss:
            best = KMeansResult(labels, centers, wcss, it)
    return best


def zscore(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    sd = x.std(axis=0)
    return (x - x.mean(axis=0)) / np.where(sd > 0, sd, 1.0)


def feature_matrix(pop: Population, feature: str) -> np.ndarray:
    if feature == "covariates":
        if pop.covariates is None or pop.covariates.shape[1] == 0:
            raise ConfigurationError("population has no covariates to segment on")
        return zscore(pop.covariates)
    if feature == "preferences":
        return np.asarray(pop.beta)
    if feature == "optimal_levels":
        return solve_granular(pop).levels
    raise ConfigurationError(f"unknown segmentation feature {feature!r}; expected one of {FEATURES}")


def policy_for_labels(pop: Population, labels: np.ndarray, k: int, best_return=None, meta=None):
    """Give every cluster its profit-maximizing treatment; membership is kept as is."""
    sums = cell_sums(pop, labels, k)
    treatments = best_cell_treatments(sums, pop.space.bounds)
    policy = SegmentedPolicy.from_assignment(treatments, labels, meta)
    return policy, policy_profit(pop, policy, best_return)


def segment_then_personalize(pop: Population, k: int, feature: str, starts: int = 5,
                             seed: int = 0, best_return=None):
    """Cluster on ``feature``, then optimize one treatment per cluster.

    ``k`` is capped at the number of distinct feature vectors.
    """
    x = feature_matrix(pop, feature)
    k_eff = min(k, len(np.unique(x, axis=0)))
    km = kmeans(x, k_eff, starts=starts, seed=seed)
    return policy_for_labels(pop, km.labels, k_eff, best_return,
                             {"method": f"kmeans-{feature}", "k": k})


def subset_count(n: int, k: int) -> int:
    return math.comb(n, k)


def best_subset(profits: np.ndarray, size: int, cap: int = 10**7, chunk_elems: int = 4_000_000):
    """Exhaustive search for the column subset maximizing ``sum_i max_j profits[i, j]``.

    Returns ``(subset, total)``. Ties go to the first subset in
    lexicographic order.
    """
    n, m = profits.shape
    if not 1 <= size <= m:
        raise ConfigurationError(f"subset size {size} must be in 1..{m}")
    count = subset_count(m, size)
    if count > cap:
        raise EnumerationCapError(count, cap)
    cols = np.ascontiguousarray(profits.T)
    chunk = max(1, chunk_elems // max(n, 1))
    combos_iter = itertools.combinations(range(m), size)
    best_total, best_combo = -np.inf, None
    while True:
        block = np.array(list(itertools.islice(combos_iter, chunk)), dtype=np.int64)
        if not len(block):
            break
        acc = cols[block[:, 0]]
        for j in range(1, size):
            acc = np.maximum(acc, cols[block[:, j]])
        totals = acc.sum(axis=1)
        i = int(np.argmax(totals))
        if totals[i] > best_total:
            best_total, best_combo = float(totals[i]), tuple(int(v) for v in block[i])
    return best_combo, best_total


def ab_test_policy(pop: Population, arms, L: int, best_return=None, cap: int = 10**7):
    """Best L-subset of discrete arms, each individual taking her best offered arm."""
    arms = [a if isinstance(a, FeasibleTreatment) else FeasibleTreatment(*a) for a in arms]
    if L > len(arms):
        raise ConfigurationError(f"L={L} exceeds the {len(arms)} available arms")
    P = profit_matrix(pop, arms)
    combo, _ = best_subset(P, L, cap)
    offered = [arms[j] for j in combo]
    assignment = np.argmax(P[:, list(combo)], axis=1) if len(pop) else np.zeros(0, int)
    policy = SegmentedPolicy.from_assignment(offered, assignment,
                                             {"method": "abtest", "subsets": subset_count(len(arms), L)})
    return policy, policy_profit(pop, policy, best_return)


def optimal_blanket(pop: Population) -> FeasibleTreatment:
    sums = cell_sums(pop, np.zeros(len(pop), dtype=np.int64), 1)
    return best_cell_treatments(sums, pop.space.bounds)[0]


def blanket(pop: Population, dim: int | None = None, value: float | None = None, best_return=None):
    """Single treatment for everyone: the given one, or the profit-maximizing one."""
    if (dim is None) != (value is None):
        raise ConfigurationError("give both dim and value for a fixed blanket, or neither")
    if dim is None:
        treatment = optimal_blanket(pop)
    else:
        pop.space.check(dim, value)
        treatment = FeasibleTreatment(dim, value)
    policy = SegmentedPolicy.from_assignment([treatment], np.zeros(len(pop), dtype=np.int64),
                                             {"method": "blanket"})
    return treatment, policy_profit(pop, policy, best_return)
