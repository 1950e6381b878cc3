"""Command-line front end.

Subcommands: ``select`` (prune one embedding file), ``oracle`` (compare
greedy against the exhaustive optimum), ``flops`` (cost-model ratio),
``sweep`` (dataset report across retention fractions, with optional
figures rendered next to the report), and ``distance`` (emit a pairwise
distance matrix).

Exit codes: 0 success, 1 usage error, 2 data error (loading or
validation), 3 computational limit.  All JSON output has a fixed field
order and 17-significant-digit floats, so identical inputs and seed
produce identical bytes.  Diagnostics go to standard error as
``error: <ErrorClass>: <message>``.
"""

from __future__ import annotations

import argparse
import glob
import json
import os
import sys

from . import __version__
from .distance import DEFAULT_MAX_ROWS, DistanceMetric, distance_matrix
from .embeddings import load_embeddings, save_embeddings
from .errors import (
    BudgetTooLarge,
    CombinatorialLimitExceeded,
    DivPruneError,
    IoError,
    MatrixTooLarge,
    NonPositiveDimension,
)
from .flops import FlopModelConfig, flop_totals, tflop_ratio
from .metrics import render_csv, render_json, run_sweep
from .selection import (
    DEFAULT_EXACT_LIMIT,
    DEFAULT_KEEP_FRACTION,
    RNG_ALGORITHM,
    Budget,
    PruneConfig,
    Strategy,
    exact_select,
    greedy_select,
    prune,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_LIMIT = 3

_LIMIT_ERRORS = (CombinatorialLimitExceeded, MatrixTooLarge)
_USAGE_ERRORS = (BudgetTooLarge, NonPositiveDimension, ValueError)


def exit_code_for(exc: BaseException) -> int:
    """Map an error to the documented nonzero exit code."""
    if isinstance(exc, _LIMIT_ERRORS):
        return EXIT_LIMIT
    if isinstance(exc, _USAGE_ERRORS):
        return EXIT_USAGE
    if isinstance(exc, DivPruneError):
        return EXIT_DATA
    raise exc


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags by default; the contract reserves 2
    # for data errors, so usage failures must exit 1
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: UsageError: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _write_text(text: str, path) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _seed(value: str) -> int:
    seed = int(value)
    if not (0 <= seed < 2**64):
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return seed


def _fraction_list(value: str) -> list:
    return [float(part) for part in value.replace(" ", "").split(",") if part]


def _name_list(value: str) -> list:
    return [part for part in value.replace(" ", "").split(",") if part]


def _budget_from(args) -> Budget:
    if getattr(args, "keep_count", None) is not None:
        return Budget.count(args.keep_count)
    if getattr(args, "keep", None) is not None:
        return Budget.fraction(args.keep)
    return Budget.fraction(DEFAULT_KEEP_FRACTION)


def _expand_inputs(patterns) -> list:
    paths = []
    for pattern in patterns:
        matched = sorted(glob.glob(pattern))
        if not matched and os.path.exists(pattern):
            matched = [pattern]
        if not matched:
            raise IoError(f"no input files match {pattern!r}")
        paths.extend(matched)
    return list(dict.fromkeys(paths))


def _load_flop_config(path) -> FlopModelConfig | None:
    if path is None:
        return None
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise IoError(f"cannot read flop config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(f"flop config {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ValueError(f"flop config {path} must hold a JSON object")
    allowed = set(FlopModelConfig.__dataclass_fields__)
    unknown = set(data) - allowed
    if unknown:
        raise ValueError(f"flop config {path} has unknown fields {sorted(unknown)}; "
                         f"expected a subset of {sorted(allowed)}")
    return FlopModelConfig(**data)


def cmd_select(args) -> int:
    budget = _budget_from(args)
    config = PruneConfig(metric=DistanceMetric.parse(args.metric),
                         strategy=Strategy.parse(args.strategy),
                         budget=budget, zero_policy=args.zero_policy,
                         seed=args.seed, max_rows=args.max_rows)
    emb = load_embeddings(args.input)
    kept_matrix, result = prune(emb, config)
    if args.emit_pruned is not None:
        save_embeddings(kept_matrix, args.emit_pruned, dtype="f64")
    doc = {
        "input": str(args.input),
        "rows": emb.rows,
        "cols": emb.cols,
        "metric": config.metric.value,
        "strategy": config.strategy.value,
        "zero_policy": config.zero_policy,
        "seed": args.seed,
        "rng": RNG_ALGORITHM,
        "requested_keep": {"kind": budget.kind, "value": budget.value},
        "kept": len(result.selected),
        "objective": result.objective,
        "selected": result.selected_ascending,
        "insertion_order": list(result.selected),
        "trace": list(result.trace),
    }
    _write_text(render_json(doc), args.output)
    return EXIT_OK


def cmd_oracle(args) -> int:
    emb = load_embeddings(args.input)
    dist = distance_matrix(emb, DistanceMetric.parse(args.metric))
    budget = Budget.count(args.keep_count)
    exact = exact_select(dist, budget, limit=args.limit)
    greedy = greedy_select(dist, budget)
    if greedy.objective == exact.objective:
        ratio = 1.0
    else:
        ratio = greedy.objective / exact.objective
    doc = {
        "input": str(args.input),
        "rows": emb.rows,
        "cols": emb.cols,
        "metric": args.metric,
        "keep_count": args.keep_count,
        "limit": args.limit,
        "exact_selected": exact.selected_ascending,
        "exact_objective": exact.objective,
        "greedy_selected": greedy.selected_ascending,
        "greedy_objective": greedy.objective,
        "ratio": ratio,
    }
    _write_text(render_json(doc), args.output)
    return EXIT_OK


def cmd_flops(args) -> int:
    config = FlopModelConfig(layers=args.layers, hidden=args.hidden, ffn=args.ffn,
                             text_tokens=args.text_tokens, visual_tokens=args.visual_tokens,
                             kept_tokens=args.kept_tokens, prune_layer=args.prune_layer)
    original, pruned = flop_totals(config)
    ratio = tflop_ratio(config)
    doc = {
        "flops_original": original,
        "flops_pruned": pruned,
        "ratio": ratio,
        "ratio_percent": ratio * 100.0,
    }
    _write_text(render_json(doc), args.output)
    return EXIT_OK


def cmd_sweep(args) -> int:
    paths = _expand_inputs(args.inputs)
    config = PruneConfig(metric=DistanceMetric.parse(args.metric),
                         zero_policy=args.zero_policy, seed=args.seed,
                         max_rows=args.max_rows)
    strategies = [Strategy.parse(name) for name in args.strategies]
    flop_config = _load_flop_config(args.flop_config)
    report = run_sweep(paths, config, strategies, args.keeps,
                       flop_config=flop_config, skip_errors=args.skip_errors)
    text = render_json(report.to_dict()) if args.format == "json" else render_csv(report)
    _write_text(text, args.output)

    figure_path = None
    if args.figures is not None:
        os.makedirs(args.figures, exist_ok=True)
        figure_path = os.path.join(args.figures, "sweep.png")
    elif args.output is not None and not args.no_figures:
        figure_path = os.path.splitext(str(args.output))[0] + "_sweep.png"
    if figure_path is not None and report.points:
        from . import plots  # deferred: pulls in matplotlib

        plots.plot_sweep(report, figure_path)
    return EXIT_OK


def cmd_distance(args) -> int:
    emb = load_embeddings(args.input)
    dist = distance_matrix(emb, DistanceMetric.parse(args.metric),
                           zero_policy=args.zero_policy, max_rows=args.max_rows)
    if args.format == "json":
        doc = {
            "input": str(args.input),
            "rows": dist.n,
            "metric": dist.metric.value,
            "zero_policy": args.zero_policy,
            "matrix": [list(row) for row in dist.values],
        }
        text = render_json(doc)
    else:
        from .metrics import format_float

        lines = [",".join(format_float(v) for v in row) for row in dist.values]
        text = "\n".join(lines) + "\n" if lines else ""
    _write_text(text, args.output)
    return EXIT_OK


def _add_common_select_flags(p) -> None:
    p.add_argument("--metric", choices=[m.value for m in DistanceMetric], default="cosine")
    p.add_argument("--zero-policy", choices=["error", "clamp"], default="error")
    p.add_argument("--max-rows", type=int, default=DEFAULT_MAX_ROWS,
                   help="dense distance matrix row cap")
    p.add_argument("--output", default=None, help="write here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="divprune",
                     description="Diversity-maximizing token pruning tools")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("select", help="prune one embedding file", parents=[])
    p.add_argument("--input", required=True)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--keep", type=float, default=None,
                       help=f"retention fraction (default {DEFAULT_KEEP_FRACTION})")
    group.add_argument("--keep-count", type=int, default=None, help="retention count")
    p.add_argument("--strategy", choices=["greedy", "random", "minmax"], default="greedy")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--emit-pruned", default=None, help="write kept rows here as binary")
    _add_common_select_flags(p)
    p.set_defaults(handler=cmd_select)

    p = sub.add_parser("oracle", help="compare greedy against the exhaustive optimum")
    p.add_argument("--input", required=True)
    p.add_argument("--keep-count", type=int, required=True)
    p.add_argument("--metric", choices=[m.value for m in DistanceMetric], default="cosine")
    p.add_argument("--limit", type=int, default=DEFAULT_EXACT_LIMIT,
                   help="abort when C(rows, keep) exceeds this")
    p.add_argument("--output", default=None)
    p.set_defaults(handler=cmd_oracle)

    p = sub.add_parser("flops", help="transformer cost-model ratio")
    p.add_argument("--layers", type=int, default=32)
    p.add_argument("--hidden", type=int, default=4096)
    p.add_argument("--ffn", type=int, default=11008)
    p.add_argument("--text-tokens", type=int, default=40)
    p.add_argument("--visual-tokens", type=int, default=576)
    p.add_argument("--kept-tokens", type=int, default=56)
    p.add_argument("--prune-layer", type=int, default=0)
    p.add_argument("--output", default=None)
    p.set_defaults(handler=cmd_flops)

    p = sub.add_parser("sweep", help="dataset report across retention fractions")
    p.add_argument("--inputs", nargs="+", required=True,
                   help="embedding files or glob patterns")
    p.add_argument("--keeps", type=_fraction_list, required=True,
                   help="comma-separated retention fractions")
    p.add_argument("--strategies", type=_name_list, default=["greedy"],
                   help="comma-separated strategy names")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--flop-config", default=None,
                   help="JSON file of cost-model fields for per-point ratios")
    p.add_argument("--skip-errors", action="store_true",
                   help="record failing inputs instead of aborting")
    p.add_argument("--figures", default=None,
                   help="directory for rendered figures (default: next to --output)")
    p.add_argument("--no-figures", action="store_true",
                   help="do not render figures")
    _add_common_select_flags(p)
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("distance", help="emit the pairwise distance matrix")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    _add_common_select_flags(p)
    p.set_defaults(handler=cmd_distance)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.handler(args)
    except SystemExit:
        raise
    except (DivPruneError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
