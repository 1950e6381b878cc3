import json
import subprocess
import sys

import numpy as np
import pytest

import divprune.errors as errors_mod
from divprune import EmbeddingMatrix, load_embeddings, save_embeddings, distance_matrix
from divprune.cli import exit_code_for, main
from divprune.errors import (
    BudgetTooLarge,
    CombinatorialLimitExceeded,
    DimensionError,
    DivPruneError,
    DuplicateIndex,
    EmptyInput,
    IndexOutOfRange,
    IoError,
    MalformedHeader,
    MatrixTooLarge,
    ModelOutOfRange,
    NonFiniteObjective,
    NonFiniteValue,
    NonPositiveDimension,
    NonPositiveFactor,
    ZeroNormVector,
)

from conftest import make_matrix


def invoke(capsys, *args):
    try:
        code = main(list(args))
    except SystemExit as exc:
        code = exc.code
    out, err = capsys.readouterr()
    return code, out, err


def run_proc(*args):
    return subprocess.run([sys.executable, "-m", "divprune.cli", *args],
                          capture_output=True)


@pytest.fixture
def matrix_576(tmp_path, rng):
    p = tmp_path / "tokens.divp"
    save_embeddings(make_matrix(rng, 576, 8), p, dtype="f64")
    return p


@pytest.fixture
def matrix_small(tmp_path, rng):
    p = tmp_path / "small.divp"
    save_embeddings(make_matrix(rng, 12, 4), p, dtype="f64")
    return p


# ---------------------------------------------------------------- select

def test_select_default_keep(capsys, matrix_576):
    code, out, _ = invoke(capsys, "select", "--input", str(matrix_576))
    assert code == 0
    doc = json.loads(out)
    assert doc["kept"] == 56 and len(doc["selected"]) == 56
    assert doc["selected"] == sorted(doc["insertion_order"])
    assert doc["requested_keep"] == {"kind": "fraction", "value": 0.098}


def test_select_field_order(capsys, matrix_small):
    code, out, _ = invoke(capsys, "select", "--input", str(matrix_small),
                          "--keep-count", "4")
    assert code == 0
    assert list(json.loads(out)) == [
        "input", "rows", "cols", "metric", "strategy", "zero_policy", "seed",
        "rng", "requested_keep", "kept", "objective", "selected",
        "insertion_order", "trace"]


def test_select_full_keep(capsys, matrix_small):
    code, out, _ = invoke(capsys, "select", "--input", str(matrix_small),
                          "--keep", "1.0")
    assert code == 0
    doc = json.loads(out)
    assert doc["selected"] == list(range(12))


def test_select_budget_too_large(capsys, matrix_small):
    code, _, err = invoke(capsys, "select", "--input", str(matrix_small),
                          "--keep-count", "999")
    assert code == 1
    assert err.startswith("error: BudgetTooLarge:")


def test_select_keep_flags_mutually_exclusive(capsys, matrix_small):
    code, _, err = invoke(capsys, "select", "--input", str(matrix_small),
                          "--keep", "0.5", "--keep-count", "3")
    assert code == 1


def test_select_emit_pruned_bit_exact(capsys, tmp_path, matrix_small):
    pruned_path = tmp_path / "pruned.divp"
    code, out, _ = invoke(capsys, "select", "--input", str(matrix_small),
                          "--keep-count", "5", "--emit-pruned", str(pruned_path))
    assert code == 0
    doc = json.loads(out)
    src = load_embeddings(matrix_small)
    back = load_embeddings(pruned_path)
    gathered = src.values[doc["selected"]]
    assert back.values.tobytes() == gathered.tobytes()


def test_select_strategies_and_objective(capsys, matrix_small):
    results = {}
    for strategy in ("greedy", "random", "minmax"):
        code, out, _ = invoke(capsys, "select", "--input", str(matrix_small),
                              "--keep-count", "4", "--strategy", strategy,
                              "--seed", "3")
        assert code == 0
        results[strategy] = json.loads(out)
    assert results["greedy"]["objective"] >= results["minmax"]["objective"]
    d = distance_matrix(load_embeddings(matrix_small))
    from divprune import maxmin_objective
    for doc in results.values():
        assert doc["objective"] == maxmin_objective(d, doc["selected"])


def test_select_seed_changes_random(capsys, matrix_small):
    outs = []
    for seed in ("1", "2"):
        _, out, _ = invoke(capsys, "select", "--input", str(matrix_small),
                           "--keep-count", "4", "--strategy", "random",
                           "--seed", seed)
        outs.append(json.loads(out)["selected"])
    assert outs[0] != outs[1]


def test_select_metric_flag(capsys, matrix_small):
    code, out, _ = invoke(capsys, "select", "--input", str(matrix_small),
                          "--keep-count", "3", "--metric", "l1")
    assert code == 0
    assert json.loads(out)["metric"] == "l1"


def test_select_byte_identical_runs(matrix_small):
    a = run_proc("select", "--input", str(matrix_small), "--keep-count", "6",
                 "--strategy", "random", "--seed", "42")
    b = run_proc("select", "--input", str(matrix_small), "--keep-count", "6",
                 "--strategy", "random", "--seed", "42")
    assert a.returncode == b.returncode == 0
    assert a.stdout == b.stdout


# ---------------------------------------------------------------- oracle

def test_oracle_triangle(capsys, tmp_path):
    p = tmp_path / "tri.csv"
    p.write_text("1,0\n0,1\n-1,0\n")
    code, out, _ = invoke(capsys, "oracle", "--input", str(p), "--keep-count", "2")
    assert code == 0
    doc = json.loads(out)
    assert doc["exact_selected"] == [0, 2]
    assert doc["exact_objective"] == 2.0
    assert doc["ratio"] <= 1.0 + 1e-12


def test_oracle_limit_exit_code(capsys, matrix_576):
    code, _, err = invoke(capsys, "oracle", "--input", str(matrix_576),
                          "--keep-count", "5", "--limit", "1000")
    assert code == 3
    assert err.startswith("error: CombinatorialLimitExceeded:")


def test_oracle_ratio_bounds_on_random_instances(capsys, tmp_path, rng):
    # metric (l2) instances: greedy is within a factor 2 of the optimum
    for i in range(10):
        p = tmp_path / f"inst{i}.divp"
        save_embeddings(make_matrix(rng, 10, 4), p, dtype="f64")
        code, out, _ = invoke(capsys, "oracle", "--input", str(p),
                              "--keep-count", "4", "--metric", "l2")
        assert code == 0
        doc = json.loads(out)
        assert 0.5 - 1e-9 <= doc["ratio"] <= 1.0 + 1e-12


# ---------------------------------------------------------------- flops

def test_flops_defaults_match_reported_band(capsys):
    code, out, _ = invoke(capsys, "flops")
    assert code == 0
    doc = json.loads(out)
    assert list(doc) == ["flops_original", "flops_pruned", "ratio", "ratio_percent"]
    assert abs(doc["ratio_percent"] - 15.63) <= 1.5


def test_flops_no_pruning(capsys):
    code, out, _ = invoke(capsys, "flops", "--kept-tokens", "576")
    assert json.loads(out)["ratio"] == 1.0
    code, out, _ = invoke(capsys, "flops", "--prune-layer", "32")
    assert json.loads(out)["ratio"] == 1.0


def test_flops_usage_errors(capsys):
    code, _, err = invoke(capsys, "flops", "--layers", "0")
    assert code == 1 and "NonPositiveDimension" in err
    code, _, err = invoke(capsys, "flops", "--kept-tokens", "999")
    assert code == 1 and "BudgetTooLarge" in err


def test_flops_model_out_of_range(capsys):
    code, _, err = invoke(capsys, "flops", "--text-tokens", "99999999")
    assert code == 2 and "ModelOutOfRange" in err


# ---------------------------------------------------------------- sweep

def test_sweep_single_point(capsys, tmp_path, rng):
    p = tmp_path / "one.divp"
    save_embeddings(make_matrix(rng, 10, 4), p, dtype="f64")
    code, out, _ = invoke(capsys, "sweep", "--inputs", str(p),
                          "--keeps", "1.0", "--no-figures")
    assert code == 0
    doc = json.loads(out)
    d = distance_matrix(load_embeddings(p))
    expected = d.values[np.triu_indices(10, k=1)].min()
    assert doc["points"][0]["objective_mean"]["greedy"] == expected


def test_sweep_flop_ratios_increase(capsys, tmp_path, matrix_small):
    fc = tmp_path / "fc.json"
    fc.write_text('{"layers": 32, "hidden": 4096, "ffn": 11008, '
                  '"text_tokens": 40, "visual_tokens": 576}')
    code, out, _ = invoke(capsys, "sweep", "--inputs", str(matrix_small),
                          "--keeps", "0.05,0.1,0.25", "--flop-config", str(fc),
                          "--no-figures")
    assert code == 0
    ratios = [p["tflop_ratio"] for p in json.loads(out)["points"]]
    assert all(a < b for a, b in zip(ratios, ratios[1:]))


def test_sweep_glob_and_csv_format(capsys, tmp_path, rng):
    for i in range(3):
        save_embeddings(make_matrix(rng, 14, 4), tmp_path / f"g{i}.divp", dtype="f64")
    code, out, _ = invoke(capsys, "sweep", "--inputs", str(tmp_path / "g*.divp"),
                          "--keeps", "0.25,0.5", "--strategies", "greedy,random",
                          "--format", "csv", "--no-figures")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "keep_fraction,tflop_ratio,objective_mean_greedy,objective_mean_random"
    assert len(lines) == 3


def test_sweep_writes_figure_next_to_output(tmp_path, matrix_small):
    out_path = tmp_path / "report.json"
    proc = run_proc("sweep", "--inputs", str(matrix_small), "--keeps", "0.25,0.5",
                    "--output", str(out_path))
    assert proc.returncode == 0
    assert out_path.exists()
    assert (tmp_path / "report_sweep.png").exists()


def test_sweep_figures_directory(tmp_path, matrix_small):
    figdir = tmp_path / "figs"
    proc = run_proc("sweep", "--inputs", str(matrix_small), "--keeps", "0.5",
                    "--figures", str(figdir))
    assert proc.returncode == 0
    assert (figdir / "sweep.png").exists()


def test_sweep_no_figures_flag(tmp_path, matrix_small):
    out_path = tmp_path / "report.json"
    proc = run_proc("sweep", "--inputs", str(matrix_small), "--keeps", "0.5",
                    "--output", str(out_path), "--no-figures")
    assert proc.returncode == 0
    assert not (tmp_path / "report_sweep.png").exists()


def test_sweep_skip_errors(capsys, tmp_path, matrix_small):
    bad = tmp_path / "bad.divp"
    bad.write_bytes(b"junk")
    code, out, _ = invoke(capsys, "sweep", "--inputs", str(matrix_small), str(bad),
                          "--keeps", "0.5", "--skip-errors", "--no-figures")
    assert code == 0
    doc = json.loads(out)
    assert len(doc["errors"]) == 1
    code, _, err = invoke(capsys, "sweep", "--inputs", str(matrix_small), str(bad),
                          "--keeps", "0.5", "--no-figures")
    assert code == 2 and "MalformedHeader" in err


def test_sweep_missing_inputs(capsys, tmp_path):
    code, _, err = invoke(capsys, "sweep", "--inputs", str(tmp_path / "nope*.divp"),
                          "--keeps", "0.5", "--no-figures")
    assert code == 2 and "IoError" in err


def test_sweep_byte_identical_file_output(tmp_path, matrix_small):
    outs = []
    for name in ("r1.json", "r2.json"):
        out_path = tmp_path / name
        proc = run_proc("sweep", "--inputs", str(matrix_small),
                        "--keeps", "0.25,0.5", "--strategies", "greedy,random",
                        "--seed", "9", "--output", str(out_path), "--no-figures")
        assert proc.returncode == 0
        outs.append(out_path.read_bytes())
    assert outs[0] == outs[1]


# ---------------------------------------------------------------- distance

def test_distance_csv(capsys, tmp_path):
    p = tmp_path / "tri.csv"
    p.write_text("1,0\n0,1\n-1,0\n")
    code, out, _ = invoke(capsys, "distance", "--input", str(p))
    assert code == 0
    rows = [[float(v) for v in line.split(",")] for line in out.strip().splitlines()]
    assert rows == [[0, 1, 2], [1, 0, 1], [2, 1, 0]]


def test_distance_json(capsys, tmp_path):
    p = tmp_path / "tri.csv"
    p.write_text("1,0\n0,1\n-1,0\n")
    code, out, _ = invoke(capsys, "distance", "--input", str(p), "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert doc["rows"] == 3 and doc["matrix"][0] == [0.0, 1.0, 2.0]


def test_distance_zero_policy(capsys, tmp_path):
    p = tmp_path / "z.csv"
    p.write_text("0,0\n1,0\n")
    code, _, err = invoke(capsys, "distance", "--input", str(p))
    assert code == 2 and "ZeroNormVector" in err
    code, out, _ = invoke(capsys, "distance", "--input", str(p),
                          "--zero-policy", "clamp")
    assert code == 0
    assert [float(v) for v in out.splitlines()[0].split(",")] == [0.0, 1.0]


def test_distance_row_cap(capsys, matrix_small):
    code, _, err = invoke(capsys, "distance", "--input", str(matrix_small),
                          "--max-rows", "4")
    assert code == 3 and "MatrixTooLarge" in err


# ---------------------------------------------------------------- exit codes

EXPECTED_CODES = {
    MalformedHeader("x"): 2,
    NonFiniteValue(0, 0, float("nan")): 2,
    DimensionError("x"): 2,
    EmptyInput("x"): 2,
    IoError("x"): 2,
    ZeroNormVector(0): 2,
    NonPositiveFactor("x"): 2,
    IndexOutOfRange("x"): 2,
    DuplicateIndex("x"): 2,
    ModelOutOfRange("x"): 2,
    NonFiniteObjective("x"): 2,
    BudgetTooLarge("x"): 1,
    NonPositiveDimension("x"): 1,
    ValueError("x"): 1,
    CombinatorialLimitExceeded(10, 5): 3,
    MatrixTooLarge("x"): 3,
}


def test_exit_code_mapping_is_exhaustive():
    covered = {type(e) for e in EXPECTED_CODES}
    all_error_classes = {
        obj for obj in vars(errors_mod).values()
        if isinstance(obj, type) and issubclass(obj, DivPruneError)
        and obj is not DivPruneError}
    assert all_error_classes <= covered
    for exc, code in EXPECTED_CODES.items():
        assert exit_code_for(exc) == code


def test_unknown_subcommand_exits_one(capsys):
    code, _, err = invoke(capsys, "frobnicate")
    assert code == 1


def test_version_flag(capsys):
    import divprune
    code, out, _ = invoke(capsys, "--version")
    assert code == 0
    assert out.strip() == f"divprune {divprune.__version__}"


def test_console_entry_point(matrix_small):
    proc = subprocess.run(["divprune", "select", "--input", str(matrix_small),
                           "--keep-count", "2"], capture_output=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["kept"] == 2
