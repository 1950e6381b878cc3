/**
 * Node bindings for the divprune CLI.
 *
 * `boundPrune` and `greedySelect` take an in-memory matrix, hand it to
 * the CLI through a temporary .divp file, and return indices only; the
 * caller gathers rows itself and keeps its own tensor types. There is
 * no reimplementation of the selection math here and no global state:
 * every call runs in its own temp directory, so calls are re-entrant.
 */
import { spawnSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { Shape, TypedMatrix, writeDivp } from "./divp.js";
import { DivPruneError, errorFromStderr } from "./errors.js";

export { DivPruneError } from "./errors.js";
export {
  DecodedMatrix,
  decodeDivp,
  encodeDivpParts,
  readDivp,
  Shape,
  TypedMatrix,
  writeDivp,
} from "./divp.js";

/** Must match the core package version (checked by `coreVersion`). */
export const VERSION = "0.1.0";

const CLI = process.env.DIVPRUNE_BIN ?? "divprune";

export type Metric = "cosine" | "l1" | "l2";
export type Strategy = "greedy" | "random" | "minmax";
export type ZeroPolicy = "error" | "clamp";

export interface SelectOptions {
  /** Retention fraction in (0, 1]; default 0.098. Exclusive with keepCount. */
  keep?: number;
  keepCount?: number;
  metric?: Metric;
  zeroPolicy?: ZeroPolicy;
  seed?: number | bigint;
  maxRows?: number;
}

export interface PruneOptions extends SelectOptions {
  strategy?: Strategy;
}

export interface PruneResult {
  /** Kept row indices, ascending. */
  indices: Uint32Array;
  /** Minimum pairwise distance within the kept set (+Infinity below 2 rows). */
  objective: number;
  /** Winning argmax/argmin score per insertion; empty for random. */
  trace: Float64Array;
}

export interface GreedyResult {
  /** Kept row indices in insertion order. */
  order: Uint32Array;
  objective: number;
  trace: Float64Array;
}

export type MatrixInput = TypedMatrix | number[][];

function runCli(args: string[]): string {
  const proc = spawnSync(CLI, args, { encoding: "utf8", maxBuffer: 256 * 1024 * 1024 });
  if (proc.error) {
    throw new DivPruneError("IoError", `cannot run ${CLI}: ${proc.error.message}`, 2);
  }
  if (proc.status !== 0) {
    throw errorFromStderr(proc.stderr ?? "", proc.status ?? 2);
  }
  return proc.stdout;
}

/** Core CLI output allows Infinity/-Infinity/NaN, which JSON.parse does not. */
export function parseCliJson(text: string): unknown {
  let out = "";
  let inString = false;
  for (let i = 0; i < text.length; i++) {
    const c = text[i];
    if (inString) {
      out += c;
      if (c === "\\") {
        out += text[++i];
      } else if (c === '"') {
        inString = false;
      }
      continue;
    }
    if (c === '"') {
      inString = true;
      out += c;
    } else if (c === "I" && text.startsWith("Infinity", i)) {
      out += "1e999"; // overflows to Infinity; a leading '-' passes through
      i += 7;
    } else if (c === "N" && text.startsWith("NaN", i)) {
      out += "null";
      i += 2;
    } else {
      out += c;
    }
  }
  return JSON.parse(out);
}

function normalize(data: MatrixInput, shape?: Shape): { values: TypedMatrix; shape: Shape } {
  if (data instanceof Float64Array || data instanceof Float32Array) {
    if (!shape) {
      throw new DivPruneError("DimensionError", "typed-array input needs an explicit shape", 2);
    }
    return { values: data, shape };
  }
  const rows = data.length;
  const cols = rows > 0 ? data[0].length : 0;
  if (cols < 1) {
    throw new DivPruneError("DimensionError", "cannot infer columns from empty input", 2);
  }
  const values = new Float64Array(rows * cols); // the documented conversion copy
  for (let r = 0; r < rows; r++) {
    if (data[r].length !== cols) {
      throw new DivPruneError(
        "DimensionError",
        `row ${r} has ${data[r].length} values, expected ${cols}`,
        2,
      );
    }
    values.set(data[r], r * cols);
  }
  return { values, shape: { rows, cols } };
}

function selectArgs(input: string, opts: PruneOptions): string[] {
  if (opts.keep !== undefined && opts.keepCount !== undefined) {
    throw new DivPruneError("ValueError", "keep and keepCount are mutually exclusive", 1);
  }
  const args = ["select", "--input", input];
  if (opts.keep !== undefined) args.push("--keep", String(opts.keep));
  if (opts.keepCount !== undefined) args.push("--keep-count", String(opts.keepCount));
  if (opts.metric) args.push("--metric", opts.metric);
  if (opts.strategy) args.push("--strategy", opts.strategy);
  if (opts.zeroPolicy) args.push("--zero-policy", opts.zeroPolicy);
  if (opts.seed !== undefined) args.push("--seed", String(opts.seed));
  if (opts.maxRows !== undefined) args.push("--max-rows", String(opts.maxRows));
  return args;
}

interface SelectDocument {
  selected: number[];
  insertion_order: number[];
  objective: number;
  trace: number[];
}

function runSelect(data: MatrixInput, shape: Shape | undefined, opts: PruneOptions): SelectDocument {
  const { values, shape: resolved } = normalize(data, shape);
  const dir = fs.mkdtempSync(path.join(os.tmpdir(), "divprune-"));
  try {
    const input = path.join(dir, "input.divp");
    writeDivp(input, values, resolved);
    return parseCliJson(runCli(selectArgs(input, opts))) as SelectDocument;
  } finally {
    fs.rmSync(dir, { recursive: true, force: true });
  }
}

export function boundPrune(data: number[][], opts?: PruneOptions): PruneResult;
export function boundPrune(data: TypedMatrix, shape: Shape, opts?: PruneOptions): PruneResult;
export function boundPrune(
  data: MatrixInput,
  shapeOrOpts?: Shape | PruneOptions,
  maybeOpts?: PruneOptions,
): PruneResult {
  const typed = data instanceof Float64Array || data instanceof Float32Array;
  const shape = typed ? (shapeOrOpts as Shape) : undefined;
  const opts = (typed ? maybeOpts : (shapeOrOpts as PruneOptions)) ?? {};
  const doc = runSelect(data, shape, opts);
  return {
    indices: Uint32Array.from(doc.selected),
    objective: doc.objective,
    trace: Float64Array.from(doc.trace),
  };
}

export function greedySelect(data: number[][], opts?: SelectOptions): GreedyResult;
export function greedySelect(data: TypedMatrix, shape: Shape, opts?: SelectOptions): GreedyResult;
export function greedySelect(
  data: MatrixInput,
  shapeOrOpts?: Shape | SelectOptions,
  maybeOpts?: SelectOptions,
): GreedyResult {
  const typed = data instanceof Float64Array || data instanceof Float32Array;
  const shape = typed ? (shapeOrOpts as Shape) : undefined;
  const opts = (typed ? maybeOpts : (shapeOrOpts as SelectOptions)) ?? {};
  const doc = runSelect(data, shape, { ...opts, strategy: "greedy" });
  return {
    order: Uint32Array.from(doc.insertion_order),
    objective: doc.objective,
    trace: Float64Array.from(doc.trace),
  };
}

/** Version reported by the CLI on PATH; should equal VERSION. */
export function coreVersion(): string {
  const parts = runCli(["--version"]).trim().split(/\s+/);
  return parts[parts.length - 1] ?? "";
}
