"""Diversity-maximizing token pruning.

Selects the subset of embedding rows that maximizes the minimum
pairwise distance within the kept set, so pruned token sequences stay
as diverse as possible under a fixed retention budget.  Ships loaders
for a compact binary matrix format and CSV, exact and greedy solvers,
ablation strategies, a transformer FLOP cost model, and dataset-level
diagnostics.  Figure rendering lives in :mod:`divprune.plots` (kept out
of this namespace so importing the library never pulls in matplotlib).
"""

from . import errors
from .distance import (
    DEFAULT_MAX_ROWS,
    ZERO_NORM_EPS,
    DistanceMatrix,
    DistanceMetric,
    distance_matrix,
    pair_distance,
)
from .embeddings import EmbeddingMatrix, load_embeddings, save_embeddings, scale_rows
from .errors import DivPruneError
from .flops import FlopModelConfig, flop_totals, layer_flops, sweep_ratio, tflop_ratio
from .metrics import (
    DiversityReport,
    SweepReport,
    diversity_histogram,
    emit_report,
    render_csv,
    render_json,
    run_dataset,
    run_sweep,
)
from .selection import (
    DEFAULT_EXACT_LIMIT,
    DEFAULT_KEEP_FRACTION,
    RNG_ALGORITHM,
    Budget,
    PruneConfig,
    SelectionResult,
    Strategy,
    exact_select,
    greedy_select,
    maxmin_objective,
    minmax_select,
    prune,
    random_select,
    select,
)

__version__ = "0.1.0"

__all__ = [
    "Budget",
    "DEFAULT_EXACT_LIMIT",
    "DEFAULT_KEEP_FRACTION",
    "DEFAULT_MAX_ROWS",
    "DistanceMatrix",
    "DistanceMetric",
    "DivPruneError",
    "DiversityReport",
    "EmbeddingMatrix",
    "FlopModelConfig",
    "PruneConfig",
    "RNG_ALGORITHM",
    "SelectionResult",
    "Strategy",
    "SweepReport",
    "ZERO_NORM_EPS",
    "__version__",
    "distance_matrix",
    "diversity_histogram",
    "emit_report",
    "errors",
    "exact_select",
    "flop_totals",
    "greedy_select",
    "layer_flops",
    "load_embeddings",
    "maxmin_objective",
    "minmax_select",
    "pair_distance",
    "prune",
    "random_select",
    "render_csv",
    "render_json",
    "run_dataset",
    "run_sweep",
    "save_embeddings",
    "scale_rows",
    "select",
    "sweep_ratio",
    "tflop_ratio",
]
