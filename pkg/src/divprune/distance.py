"""Pairwise distances between token embeddings.

Supported metrics: cosine distance (1 minus cosine similarity, bounded in
[0, 2]), l1, and l2.  The full cosine matrix is built from a single
normalized matrix product; l1/l2 matrices are built row by row with the
same arithmetic as the single-pair path.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .embeddings import EmbeddingMatrix
from .errors import DimensionError, MatrixTooLarge, ZeroNormVector

ZERO_NORM_EPS = 1e-12
DEFAULT_MAX_ROWS = 16384


class DistanceMetric(str, Enum):
    COSINE = "cosine"
    L1 = "l1"
    L2 = "l2"

    @classmethod
    def parse(cls, name: str) -> "DistanceMetric":
        try:
            return cls(name.lower())
        except ValueError:
            raise ValueError(f"unknown metric {name!r}; expected cosine, l1, or l2") from None


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric matrix of pairwise distances with an exact zero diagonal."""

    values: np.ndarray
    metric: DistanceMetric

    @property
    def n(self) -> int:
        return self.values.shape[0]


def _check_zero_policy(zero_policy: str) -> None:
    if zero_policy not in ("error", "clamp"):
        raise ValueError(f"zero_policy must be 'error' or 'clamp', got {zero_policy!r}")


def pair_distance(a, b, metric: DistanceMetric = DistanceMetric.COSINE,
                  zero_policy: str = "error") -> float:
    """Distance between two token vectors under ``metric``.

    Cosine similarity is clamped to [-1, 1] before mapping to a distance,
    so the result always lies in [0, 2].  A vector of norm <= 1e-12 under
    the cosine metric raises :class:`ZeroNormVector` unless
    ``zero_policy='clamp'``, which treats it as orthogonal to everything
    (distance 1).
    """
    _check_zero_policy(zero_policy)
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    if va.ndim != 1 or vb.ndim != 1:
        raise DimensionError("pair_distance expects 1-D vectors")
    if va.shape[0] != vb.shape[0]:
        raise DimensionError(f"vector lengths differ: {va.shape[0]} vs {vb.shape[0]}")
    if va.shape[0] < 1:
        raise DimensionError("vectors must have dimension >= 1")
    if metric == DistanceMetric.L1:
        return float(np.abs(va - vb).sum())
    if metric == DistanceMetric.L2:
        return float(np.sqrt(((va - vb) ** 2).sum()))
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na <= ZERO_NORM_EPS or nb <= ZERO_NORM_EPS:
        if zero_policy == "error":
            raise ZeroNormVector()
        return 1.0
    sim = float(np.dot(va, vb) / (na * nb))
    sim = min(1.0, max(-1.0, sim))
    return 1.0 - sim


def distance_matrix(m: EmbeddingMatrix, metric: DistanceMetric = DistanceMetric.COSINE,
                    zero_policy: str = "error",
                    max_rows: int = DEFAULT_MAX_ROWS) -> DistanceMatrix:
    """Dense pairwise distance matrix over the rows of ``m``.

    The result is forced exactly symmetric with an exact zero diagonal.
    Raises :class:`MatrixTooLarge` if ``m`` has more than ``max_rows``
    rows (the dense matrix costs 8*n^2 bytes).
    """
    _check_zero_policy(zero_policy)
    n = m.rows
    if n > max_rows:
        raise MatrixTooLarge(f"{n} rows exceed the dense-matrix cap of {max_rows}")
    x = m.values
    if metric == DistanceMetric.COSINE:
        norms = np.linalg.norm(x, axis=1)
        zero = norms <= ZERO_NORM_EPS
        if zero.any():
            if zero_policy == "error":
                raise ZeroNormVector(int(np.argmax(zero)))
            norms = np.where(zero, 1.0, norms)
            x = np.where(zero[:, None], 0.0, x)
        unit = x / norms[:, None]
        sim = np.clip(unit @ unit.T, -1.0, 1.0)
        d = 1.0 - sim
        # a zero row has similarity 0 to everything, i.e. distance 1
    elif metric == DistanceMetric.L1:
        d = np.empty((n, n), dtype=np.float64)
        for i in range(n):
            d[i] = np.abs(x - x[i]).sum(axis=1)
    else:
        d = np.empty((n, n), dtype=np.float64)
        for i in range(n):
            d[i] = np.sqrt(((x - x[i]) ** 2).sum(axis=1))
    upper = np.triu(d, k=1)
    d = upper + upper.T  # exact symmetry, exact zero diagonal
    d.flags.writeable = False
    return DistanceMatrix(values=d, metric=metric)
