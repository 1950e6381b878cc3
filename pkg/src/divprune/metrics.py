"""Diversity diagnostics over datasets of embedding files.

``run_dataset`` scores one or more strategies per input file and
assembles a :class:`DiversityReport` (per-instance max-min objectives,
per-strategy histograms on shared bins, summary statistics).
``run_sweep`` repeats selection across a grid of retention fractions
and assembles a :class:`SweepReport`.  ``emit_report`` serializes either
report as JSON or CSV with a fixed field order and floats printed at 17
significant digits, so identical inputs and seed yield identical bytes.

This module computes and serializes numbers only; figures live in
``plots``.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .distance import DistanceMetric, distance_matrix
from .embeddings import load_embeddings
from .errors import DivPruneError, EmptyInput, IoError, NonFiniteObjective
from .flops import FlopModelConfig, tflop_ratio
from .selection import Budget, PruneConfig, Strategy, select


@dataclass(frozen=True)
class DiversityReport:
    """Per-instance objectives plus histogram and summary per strategy.

    ``per_instance`` rows carry the serialized field names
    {instance_id, strategy, M, M_kept, objective, tflop_ratio};
    ``histogram`` rows carry {strategy, bin_lower, bin_upper, count} on
    bins shared across strategies, so per-strategy counts each sum to
    the number of scored instances; ``summary`` maps strategy to
    {mean, median, min, max}.  ``errors`` lists files skipped under
    skip_errors as {instance_id, error, message}.
    """

    per_instance: list
    histogram: list
    summary: dict
    errors: list

    def to_dict(self) -> dict:
        return {"per_instance": self.per_instance, "histogram": self.histogram,
                "summary": self.summary, "errors": self.errors}


@dataclass(frozen=True)
class SweepReport:
    """Objective means per strategy across a grid of retention fractions.

    ``points`` rows carry {keep_fraction, tflop_ratio, objective_mean};
    keep_fraction is strictly increasing across rows; tflop_ratio is
    null unless a FLOP model config was supplied.
    """

    points: list
    errors: list

    def to_dict(self) -> dict:
        return {"points": self.points, "errors": self.errors}


def diversity_histogram(objectives, bins: int) -> list:
    """Equal-width histogram of objectives over [0, max(objectives)].

    Bins are left-closed and right-open; the final bin is closed, so
    values equal to the overall maximum land in it.  Returns rows of
    {bin_lower, bin_upper, count}.
    """
    values = [float(v) for v in objectives]
    if not values:
        raise EmptyInput("no objectives to bin")
    if int(bins) != bins or bins < 1:
        raise ValueError(f"bins must be a positive integer, got {bins!r}")
    bins = int(bins)
    for v in values:
        if not math.isfinite(v):
            raise NonFiniteObjective(f"objective {v!r} cannot be binned")
        if v < 0:
            raise ValueError(f"objectives must be non-negative, got {v!r}")
    hi = max(values)
    edges = np.linspace(0.0, hi, bins + 1)
    if hi == 0.0:
        counts = np.zeros(bins, dtype=int)
        counts[-1] = len(values)
    else:
        idx = np.searchsorted(edges, np.asarray(values), side="right") - 1
        idx = np.clip(idx, 0, bins - 1)
        counts = np.bincount(idx, minlength=bins)
    return [{"bin_lower": float(edges[i]), "bin_upper": float(edges[i + 1]),
             "count": int(counts[i])} for i in range(bins)]


def _instance_ids(paths: list) -> list:
    """File basenames, falling back to full paths when basenames collide."""
    names = [os.path.basename(str(p)) for p in paths]
    seen: dict = {}
    for name in names:
        seen[name] = seen.get(name, 0) + 1
    return [str(p) if seen[name] > 1 else name for name, p in zip(names, paths)]


def _summarize(values: list) -> dict:
    arr = np.asarray(values, dtype=np.float64)
    return {"mean": float(arr.mean()), "median": float(np.median(arr)),
            "min": float(arr.min()), "max": float(arr.max())}


def _ratio_for(flop_config: FlopModelConfig, visual: int, kept: int) -> float:
    return tflop_ratio(replace(flop_config, visual_tokens=visual, kept_tokens=kept))


def _strategy_list(strategies) -> list:
    out = [s if isinstance(s, Strategy) else Strategy.parse(str(s)) for s in strategies]
    if not out:
        raise ValueError("at least one strategy is required")
    return out


def run_dataset(paths, config: PruneConfig, strategies, *, bins: int = 10,
                flop_config: FlopModelConfig | None = None,
                skip_errors: bool = False) -> DiversityReport:
    """Score every strategy on every embedding file.

    Results keep input path order.  The random strategy draws from seed
    ``config.seed + i`` for the i-th file, so instances differ but the
    whole report is a pure function of paths, config, and strategies.
    With ``skip_errors``, a file that fails to load or score is recorded
    under ``errors`` and excluded; otherwise the failure propagates with
    the instance id prefixed to its message.
    """
    paths = [str(p) for p in paths]
    strategy_list = _strategy_list(strategies)
    ids = _instance_ids(paths)
    base_flops = flop_config if flop_config is not None else FlopModelConfig()

    per_instance: list = []
    errors: list = []
    by_strategy: dict = {s.value: [] for s in strategy_list}
    for pos, (path, iid) in enumerate(zip(paths, ids)):
        try:
            emb = load_embeddings(path)
            dist = distance_matrix(emb, config.metric, zero_policy=config.zero_policy,
                                   max_rows=config.max_rows)
            rows = []
            for strat in strategy_list:
                result = select(dist, strat, config.budget,
                                seed=config.seed + pos, exact_limit=config.exact_limit)
                kept = len(result.selected)
                rows.append({"instance_id": iid, "strategy": strat.value,
                             "M": emb.rows, "M_kept": kept,
                             "objective": result.objective,
                             "tflop_ratio": _ratio_for(base_flops, emb.rows, kept)})
        except DivPruneError as exc:
            if skip_errors:
                errors.append({"instance_id": iid, "error": type(exc).__name__,
                               "message": str(exc)})
                continue
            exc.args = (f"{iid}: {exc}",)
            raise
        for row in rows:
            per_instance.append(row)
            by_strategy[row["strategy"]].append(row["objective"])

    histogram: list = []
    summary: dict = {}
    all_objectives = [row["objective"] for row in per_instance]
    if all_objectives:
        for v in all_objectives:
            if not math.isfinite(v):
                raise NonFiniteObjective(
                    "an instance kept a single token, so its objective is infinite "
                    "and no histogram is definable; keep at least two tokens")
        hi = max(all_objectives)
        edges = np.linspace(0.0, hi if hi > 0 else 0.0, int(bins) + 1)
        for strat in strategy_list:
            # shared bins across strategies: bin directly against the global edges
            values = by_strategy[strat.value]
            if hi == 0.0:
                counts = [0] * (int(bins) - 1) + [len(values)]
            else:
                idx = np.searchsorted(edges, np.asarray(values), side="right") - 1
                idx = np.clip(idx, 0, int(bins) - 1)
                counts = np.bincount(idx, minlength=int(bins)).tolist()
            histogram.extend({"strategy": strat.value, "bin_lower": float(edges[i]),
                              "bin_upper": float(edges[i + 1]), "count": int(counts[i])}
                             for i in range(int(bins)))
            summary[strat.value] = _summarize(values)
    return DiversityReport(per_instance=per_instance, histogram=histogram,
                           summary=summary, errors=errors)


def run_sweep(paths, config: PruneConfig, strategies, keeps, *,
              flop_config: FlopModelConfig | None = None,
              skip_errors: bool = False) -> SweepReport:
    """Evaluate every strategy at every retention fraction.

    ``keeps`` are fractions in (0, 1]; they are deduplicated and sorted
    so points come out strictly increasing.  Each file is loaded and its
    distance matrix built once.  ``tflop_ratio`` per point is computed
    from ``flop_config`` (its own visual token count, kept resolved by
    the floor rule) and is null when no config is given.
    """
    paths = [str(p) for p in paths]
    if not paths:
        raise EmptyInput("at least one input file is required")
    strategy_list = _strategy_list(strategies)
    fractions = sorted({float(k) for k in keeps})
    if not fractions:
        raise ValueError("at least one keep fraction is required")
    budgets = [Budget.fraction(f) for f in fractions]
    ids = _instance_ids(paths)

    loaded = []
    errors: list = []
    for pos, (path, iid) in enumerate(zip(paths, ids)):
        try:
            emb = load_embeddings(path)
            dist = distance_matrix(emb, config.metric, zero_policy=config.zero_policy,
                                   max_rows=config.max_rows)
        except DivPruneError as exc:
            if skip_errors:
                errors.append({"instance_id": iid, "error": type(exc).__name__,
                               "message": str(exc)})
                continue
            exc.args = (f"{iid}: {exc}",)
            raise
        loaded.append((pos, iid, dist))

    points: list = []
    for fraction, budget in zip(fractions, budgets):
        means: dict = {}
        for strat in strategy_list:
            values = []
            for pos, iid, dist in loaded:
                try:
                    result = select(dist, strat, budget,
                                    seed=config.seed + pos, exact_limit=config.exact_limit)
                except DivPruneError as exc:
                    if skip_errors:
                        errors.append({"instance_id": iid, "error": type(exc).__name__,
                                       "message": str(exc)})
                        continue
                    exc.args = (f"{iid}: {exc}",)
                    raise
                values.append(result.objective)
            means[strat.value] = float(np.mean(values)) if values else None
        ratio = None
        if flop_config is not None:
            kept = budget.resolve(flop_config.visual_tokens)
            ratio = _ratio_for(flop_config, flop_config.visual_tokens, kept)
        points.append({"keep_fraction": fraction, "tflop_ratio": ratio,
                       "objective_mean": means})
    return SweepReport(points=points, errors=errors)


def format_float(x: float) -> str:
    """17-significant-digit decimal form that round-trips to the same bits."""
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    text = format(float(x), ".17g")
    if not any(c in text for c in ".eE"):
        text += ".0"
    return text


def _json_value(value, indent: int) -> str:
    pad = " " * indent
    inner = " " * (indent + 2)
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(float(value))
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, dict):
        if not value:
            return "{}"
        body = ",\n".join(f"{inner}{json.dumps(str(k))}: {_json_value(v, indent + 2)}"
                          for k, v in value.items())
        return "{\n" + body + "\n" + pad + "}"
    if isinstance(value, (list, tuple)):
        if not len(value):
            return "[]"
        body = ",\n".join(f"{inner}{_json_value(v, indent + 2)}" for v in value)
        return "[\n" + body + "\n" + pad + "]"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def render_json(value) -> str:
    """Serialize with insertion-order keys and 17-digit floats; ends with newline."""
    return _json_value(value, 0) + "\n"


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format_float(float(value))
    text = str(value)
    if any(c in text for c in ',"\n'):
        text = '"' + text.replace('"', '""') + '"'
    return text


def render_csv(report) -> str:
    """Serialize a report as CSV; one row per instance or sweep point."""
    lines = []
    if isinstance(report, DiversityReport):
        header = ["instance_id", "strategy", "M", "M_kept", "objective", "tflop_ratio"]
        lines.append(",".join(header))
        for row in report.per_instance:
            lines.append(",".join(_csv_cell(row[k]) for k in header))
    elif isinstance(report, SweepReport):
        strategies = sorted({k for p in report.points for k in p["objective_mean"]})
        header = ["keep_fraction", "tflop_ratio"] + [f"objective_mean_{s}" for s in strategies]
        lines.append(",".join(header))
        for p in report.points:
            cells = [_csv_cell(p["keep_fraction"]), _csv_cell(p["tflop_ratio"])]
            cells += [_csv_cell(p["objective_mean"].get(s)) for s in strategies]
            lines.append(",".join(cells))
    else:
        raise TypeError(f"cannot render {type(report).__name__} as CSV")
    return "\n".join(lines) + "\n"


def emit_report(report, format: str, path) -> None:
    """Write the report as 'json' or 'csv'; I/O failures raise IoError."""
    if format == "json":
        text = render_json(report.to_dict())
    elif format == "csv":
        text = render_csv(report)
    else:
        raise ValueError(f"format must be 'json' or 'csv', got {format!r}")
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write report to {path}: {exc}") from exc
