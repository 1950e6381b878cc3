"""Subset selection over a pairwise distance matrix.

The target quantity is the max-min objective: the smallest pairwise
distance within the selected subset.  ``greedy_select`` maximizes it with
a two-stage farthest-point construction; ``exact_select`` maximizes it
exactly by pruned exhaustive enumeration; ``random_select`` and
``minmax_select`` are ablation strategies (uniform sampling, and the
mirrored construction that *minimizes* the maximum pairwise distance,
which concentrates the subset).

Every selector is deterministic: all argmax/argmin ties are broken by
the lowest index, and ``random_select`` is a pure function of its seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .distance import DistanceMatrix, DistanceMetric, distance_matrix
from .embeddings import EmbeddingMatrix
from .errors import (
    BudgetTooLarge,
    CombinatorialLimitExceeded,
    DuplicateIndex,
    EmptyInput,
    IndexOutOfRange,
)

RNG_ALGORITHM = "numpy-pcg64"  # generator behind random_select, recorded in CLI output

DEFAULT_KEEP_FRACTION = 0.098  # default retention budget (9.8% of tokens)
DEFAULT_EXACT_LIMIT = 2_000_000


class Strategy(str, Enum):
    GREEDY = "greedy"
    EXACT = "exact"
    RANDOM = "random"
    MINMAX = "minmax"

    @classmethod
    def parse(cls, name: str) -> "Strategy":
        try:
            return cls(name.lower())
        except ValueError:
            raise ValueError(
                f"unknown strategy {name!r}; expected greedy, exact, random, or minmax"
            ) from None


@dataclass(frozen=True)
class Budget:
    """Retention budget, either an absolute count or a fraction of rows."""

    kind: str
    value: float

    def __post_init__(self):
        if self.kind == "count":
            if int(self.value) != self.value or self.value < 1:
                raise ValueError(f"count budget must be a positive integer, got {self.value!r}")
        elif self.kind == "fraction":
            if not (0.0 < self.value <= 1.0):
                raise ValueError(f"fraction budget must lie in (0, 1], got {self.value!r}")
        else:
            raise ValueError(f"budget kind must be 'count' or 'fraction', got {self.kind!r}")

    @classmethod
    def count(cls, n: int) -> "Budget":
        return cls("count", n)

    @classmethod
    def fraction(cls, f: float) -> "Budget":
        return cls("fraction", f)

    def resolve(self, total: int) -> int:
        """Number of tokens to keep out of ``total``.

        Fractions resolve to floor(total * value), never below 1, so a
        FLOP budget expressed as a fraction is never exceeded.
        """
        if total < 1:
            raise EmptyInput("cannot resolve a budget against zero tokens")
        if self.kind == "count":
            k = int(self.value)
            if k > total:
                raise BudgetTooLarge(f"requested {k} tokens but only {total} exist")
            return k
        return max(1, math.floor(total * self.value))


@dataclass(frozen=True)
class SelectionResult:
    """Outcome of one selection run.

    ``selected`` lists kept token indices in insertion order for the
    iterative strategies (greedy, minmax) and ascending for exact and
    random.  ``objective`` is the max-min value of the selected set
    (+inf when fewer than two tokens are kept).  ``trace`` records, for
    the iterative strategies, the score that won each insertion's
    argmax/argmin; it is empty for exact and random.
    """

    selected: list[int]
    objective: float
    trace: list[float]
    strategy: Strategy

    @property
    def selected_ascending(self) -> list[int]:
        return sorted(self.selected)


@dataclass(frozen=True)
class PruneConfig:
    """Everything ``prune`` needs: metric, strategy, budget, and policies.

    Argmax/argmin ties are always broken by the lowest index; degenerate
    zero-norm rows under the cosine metric follow ``zero_policy``.
    """

    metric: DistanceMetric = DistanceMetric.COSINE
    strategy: Strategy = Strategy.GREEDY
    budget: Budget = field(default_factory=lambda: Budget.fraction(DEFAULT_KEEP_FRACTION))
    zero_policy: str = "error"
    seed: int = 0
    exact_limit: int = DEFAULT_EXACT_LIMIT
    max_rows: int = 16384


def _validate_subset(n: int, subset) -> list[int]:
    idx = [int(i) for i in subset]
    for i in idx:
        if not (0 <= i < n):
            raise IndexOutOfRange(f"index {i} outside [0, {n})")
    if len(set(idx)) != len(idx):
        raise DuplicateIndex(f"subset {idx} contains repeated indices")
    return idx


def maxmin_objective(dist: DistanceMatrix, subset) -> float:
    """Smallest pairwise distance within ``subset``; +inf if |subset| <= 1."""
    idx = _validate_subset(dist.n, subset)
    if len(idx) <= 1:
        return math.inf
    sub = dist.values[np.ix_(idx, idx)]
    iu = np.triu_indices(len(idx), k=1)
    return float(sub[iu].min())


def _require_tokens(dist: DistanceMatrix) -> int:
    if dist.n == 0:
        raise EmptyInput("distance matrix has no tokens")
    return dist.n


def greedy_select(dist: DistanceMatrix, budget: Budget) -> SelectionResult:
    """Two-stage farthest-point construction maximizing the max-min objective.

    Stage 1 seeds the subset with the most isolated token: the argmax
    over tokens of their minimum distance to any other token.  Stage 2
    repeatedly adds the candidate whose minimum distance to the selected
    set is largest.  Ties pick the lowest index.
    """
    n = _require_tokens(dist)
    k = budget.resolve(n)
    d = dist.values

    # stage 1: most isolated token overall
    masked = np.where(np.eye(n, dtype=bool), math.inf, d)
    d_min = masked.min(axis=1)  # +inf when n == 1
    first = int(np.argmax(d_min))
    selected = [first]
    trace = [float(d_min[first])]

    # stage 2: farthest-from-selected, tracked incrementally
    to_selected = d[:, first].copy()
    to_selected[first] = -math.inf  # never re-pick
    while len(selected) < k:
        nxt = int(np.argmax(to_selected))
        trace.append(float(to_selected[nxt]))
        selected.append(nxt)
        np.minimum(to_selected, d[:, nxt], out=to_selected)
        to_selected[nxt] = -math.inf
    return SelectionResult(selected=selected,
                           objective=maxmin_objective(dist, selected),
                           trace=trace, strategy=Strategy.GREEDY)


def exact_select(dist: DistanceMatrix, budget: Budget,
                 limit: int = DEFAULT_EXACT_LIMIT) -> SelectionResult:
    """Exhaustive max-min optimum by depth-first enumeration.

    Subsets are visited in lexicographic order; a partial subset is
    abandoned as soon as its internal minimum cannot beat the incumbent,
    so the first optimum found is the lexicographically smallest.
    Raises :class:`CombinatorialLimitExceeded` when C(n, k) > ``limit``.
    """
    n = _require_tokens(dist)
    k = budget.resolve(n)
    n_subsets = math.comb(n, k)
    if n_subsets > limit:
        raise CombinatorialLimitExceeded(n_subsets, limit)
    d = dist.values

    best_obj = -math.inf
    best_sel: list[int] = []
    chosen: list[int] = []

    def extend(start: int, cur_min: float) -> None:
        nonlocal best_obj, best_sel
        if len(chosen) == k:
            best_obj = cur_min  # guarded by the pruning test below
            best_sel = chosen.copy()
            return
        last_start = n - (k - len(chosen)) + 1
        for j in range(start, last_start):
            new_min = min(cur_min, d[chosen, j].min()) if chosen else cur_min
            if new_min <= best_obj:
                continue
            chosen.append(j)
            extend(j + 1, new_min)
            chosen.pop()

    extend(0, math.inf)
    return SelectionResult(selected=best_sel,
                           objective=maxmin_objective(dist, best_sel),
                           trace=[], strategy=Strategy.EXACT)


def random_select(dist: DistanceMatrix, budget: Budget, seed: int = 0) -> SelectionResult:
    """Uniform sample of k distinct indices; deterministic given ``seed``."""
    n = _require_tokens(dist)
    k = budget.resolve(n)
    rng = np.random.default_rng(seed)
    selected = sorted(int(i) for i in rng.choice(n, size=k, replace=False))
    return SelectionResult(selected=selected,
                           objective=maxmin_objective(dist, selected),
                           trace=[], strategy=Strategy.RANDOM)


def minmax_select(dist: DistanceMatrix, budget: Budget) -> SelectionResult:
    """Mirror of ``greedy_select`` with both optimizations flipped.

    Stage 1 seeds with the token whose *maximum* distance to the others
    is smallest; stage 2 repeatedly adds the candidate whose maximum
    distance to the selected set is smallest.  The result concentrates
    rather than spreads the subset.  Ties pick the lowest index.
    """
    n = _require_tokens(dist)
    k = budget.resolve(n)
    d = dist.values

    masked = np.where(np.eye(n, dtype=bool), -math.inf, d)
    d_max = masked.max(axis=1)  # -inf when n == 1
    first = int(np.argmin(d_max))
    selected = [first]
    trace = [float(d_max[first])]

    to_selected = d[:, first].copy()
    to_selected[first] = math.inf  # never re-pick
    while len(selected) < k:
        nxt = int(np.argmin(to_selected))
        trace.append(float(to_selected[nxt]))
        selected.append(nxt)
        np.maximum(to_selected, d[:, nxt], out=to_selected)
        to_selected[nxt] = math.inf
    return SelectionResult(selected=selected,
                           objective=maxmin_objective(dist, selected),
                           trace=trace, strategy=Strategy.MINMAX)


def select(dist: DistanceMatrix, strategy: Strategy, budget: Budget,
           seed: int = 0, exact_limit: int = DEFAULT_EXACT_LIMIT) -> SelectionResult:
    """Dispatch to the selector named by ``strategy``."""
    if strategy == Strategy.GREEDY:
        return greedy_select(dist, budget)
    if strategy == Strategy.EXACT:
        return exact_select(dist, budget, limit=exact_limit)
    if strategy == Strategy.RANDOM:
        return random_select(dist, budget, seed=seed)
    return minmax_select(dist, budget)


def prune(emb: EmbeddingMatrix, config: PruneConfig) -> tuple[EmbeddingMatrix, SelectionResult]:
    """Select tokens per ``config`` and gather the kept rows.

    The returned matrix holds the kept rows in their original input
    order (ascending index): retained tokens re-enter a
    position-sensitive sequence, so their relative order must survive.
    """
    dist = distance_matrix(emb, config.metric, zero_policy=config.zero_policy,
                           max_rows=config.max_rows)
    result = select(dist, config.strategy, config.budget,
                    seed=config.seed, exact_limit=config.exact_limit)
    kept = emb.values[result.selected_ascending]
    return EmbeddingMatrix.from_array(kept, cols=emb.cols), result
