"""Shared fixtures and independent oracles.

The oracles here are deliberately naive: plain loops over the same
float64 distance entries, exact comparisons, lowest-index argmax by
linear scan.  They recompute what the library computes without sharing
any code with it, so agreement is evidence rather than tautology.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from divprune import DistanceMetric, EmbeddingMatrix, save_embeddings


# ---------------------------------------------------------------- distances

def naive_pair_distance(a, b, metric) -> float:
    a = [float(x) for x in a]
    b = [float(x) for x in b]
    if metric == DistanceMetric.L1 or metric == "l1":
        return sum(abs(x - y) for x, y in zip(a, b))
    if metric == DistanceMetric.L2 or metric == "l2":
        return math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(y * y for y in b))
    sim = dot / (na * nb)
    sim = max(-1.0, min(1.0, sim))
    return 1.0 - sim


def naive_distance_matrix(rows, metric) -> np.ndarray:
    n = len(rows)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            out[i, j] = out[j, i] = naive_pair_distance(rows[i], rows[j], metric)
    return out


# ---------------------------------------------------------------- selection

def naive_maxmin(d: np.ndarray, subset) -> float:
    subset = list(subset)
    if len(subset) <= 1:
        return math.inf
    return min(float(d[i, j]) for i, j in itertools.combinations(subset, 2))


def naive_greedy(d: np.ndarray, k: int):
    """(selected insertion order, trace) per the two-stage construction."""
    n = d.shape[0]
    best, best_i = -math.inf, 0
    for i in range(n):
        dmin = min((float(d[i, j]) for j in range(n) if j != i), default=math.inf)
        if dmin > best:
            best, best_i = dmin, i
    selected, trace = [best_i], [best]
    while len(selected) < k:
        best, best_i = -math.inf, None
        for i in range(n):
            if i in selected:
                continue
            dmin = min(float(d[i, j]) for j in selected)
            if dmin > best:
                best, best_i = dmin, i
        selected.append(best_i)
        trace.append(best)
    return selected, trace


def naive_minmax(d: np.ndarray, k: int):
    n = d.shape[0]
    best, best_i = math.inf, 0
    for i in range(n):
        dmax = max((float(d[i, j]) for j in range(n) if j != i), default=-math.inf)
        if dmax < best:
            best, best_i = dmax, i
    selected, trace = [best_i], [best]
    while len(selected) < k:
        best, best_i = math.inf, None
        for i in range(n):
            if i in selected:
                continue
            dmax = max(float(d[i, j]) for j in selected)
            if dmax < best:
                best, best_i = dmax, i
        selected.append(best_i)
        trace.append(best)
    return selected, trace


def brute_exact(d: np.ndarray, k: int):
    """(lexicographically smallest optimal subset, objective) by full scan."""
    n = d.shape[0]
    best_obj, best_sub = -math.inf, None
    for sub in itertools.combinations(range(n), k):
        obj = naive_maxmin(d, sub)
        if obj > best_obj:
            best_obj, best_sub = obj, list(sub)
    return best_sub, best_obj


# ---------------------------------------------------------------- cost model

def exact_layer_cost(seq_len: int, hidden: int, ffn: int) -> int:
    s, d, m = int(seq_len), int(hidden), int(ffn)
    return 4 * s * d * d - 2 * s * s * d + 2 * s * d * m


def exact_cost_ratio(layers, hidden, ffn, text, visual, kept, prune_layer) -> Fraction:
    full = exact_layer_cost(text + visual, hidden, ffn)
    reduced = exact_layer_cost(text + kept, hidden, ffn)
    num = prune_layer * full + (layers - prune_layer) * reduced
    return Fraction(num, layers * full)


# ---------------------------------------------------------------- fixtures

def make_matrix(rng, rows: int, cols: int) -> EmbeddingMatrix:
    return EmbeddingMatrix.from_array(rng.normal(size=(rows, cols)))


def tie_free(d: np.ndarray) -> bool:
    upper = d[np.triu_indices(d.shape[0], k=1)]
    return len(np.unique(upper)) == len(upper)


def greedy_decision_margin(d: np.ndarray, k: int) -> float:
    """Smallest winner-vs-runner-up gap across all greedy argmax steps.

    Distinct matrix entries make every stage-2 argmax unique, but the
    stage-1 isolation argmax can tie exactly when the two most isolated
    tokens are mutual nearest neighbors (both scores are the same
    entry).  Permutation equivariance only holds when every argmax has
    a margin above numerical noise, so tests filter instances by this.
    """
    n = d.shape[0]
    margin = math.inf

    def winner_gap(scores):
        order = sorted(scores, reverse=True)
        return math.inf if len(order) < 2 else order[0] - order[1]

    stage1 = [min((float(d[i, j]) for j in range(n) if j != i), default=math.inf)
              for i in range(n)]
    margin = min(margin, winner_gap(stage1))
    selected = [max(range(n), key=lambda i: (stage1[i], -i))]
    while len(selected) < k:
        scores = {i: min(float(d[i, j]) for j in selected)
                  for i in range(n) if i not in selected}
        margin = min(margin, winner_gap(list(scores.values())))
        best = max(scores, key=lambda i: (scores[i], -i))
        selected.append(best)
    return margin


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def divp_file(tmp_path, rng):
    def _write(rows=30, cols=8, name="m.divp", dtype="f64"):
        path = tmp_path / name
        save_embeddings(make_matrix(rng, rows, cols), path, dtype=dtype)
        return path
    return _write
