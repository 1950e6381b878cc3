/**
 * The .divp byte format: 16-byte little-endian header, row-major payload.
 *
 *   0  u8[4]  magic "DIVP"
 *   4  u16    version (1)
 *   6  u8     dtype: 0 = f32, 1 = f64
 *   7  u8     reserved (0)
 *   8  u32    rows
 *  12  u32    cols
 *
 * Writing a row-major Float64Array or Float32Array is zero-copy (the
 * payload Buffer is a view over the caller's memory); everything else
 * takes one conversion copy. Big-endian hosts always copy with a swap.
 */
import * as fs from "node:fs";
import * as os from "node:os";

import { DivPruneError } from "./errors.js";

export const DIVP_MAGIC = "DIVP";
export const DIVP_VERSION = 1;
export const HEADER_BYTES = 16;

export type TypedMatrix = Float64Array | Float32Array;

export interface Shape {
  rows: number;
  cols: number;
}

export interface DecodedMatrix extends Shape {
  dtype: "f32" | "f64";
  /** Always f64; f32 payloads are widened on read. */
  values: Float64Array;
}

function checkShape(values: TypedMatrix, shape: Shape): void {
  const { rows, cols } = shape;
  if (!Number.isInteger(rows) || !Number.isInteger(cols) || rows < 0 || cols < 1) {
    throw new DivPruneError("DimensionError", `bad shape ${rows}x${cols}`, 2);
  }
  if (rows * cols !== values.length) {
    throw new DivPruneError(
      "DimensionError",
      `shape ${rows}x${cols} needs ${rows * cols} values, got ${values.length}`,
      2,
    );
  }
}

export function encodeDivpParts(values: TypedMatrix, shape: Shape): Buffer[] {
  checkShape(values, shape);
  const f64 = values instanceof Float64Array;
  const header = Buffer.alloc(HEADER_BYTES);
  header.write(DIVP_MAGIC, 0, "ascii");
  header.writeUInt16LE(DIVP_VERSION, 4);
  header.writeUInt8(f64 ? 1 : 0, 6);
  header.writeUInt8(0, 7);
  header.writeUInt32LE(shape.rows, 8);
  header.writeUInt32LE(shape.cols, 12);

  let payload: Buffer;
  if (os.endianness() === "LE") {
    payload = Buffer.from(values.buffer, values.byteOffset, values.byteLength);
  } else {
    payload = Buffer.alloc(values.byteLength);
    const view = new DataView(payload.buffer, payload.byteOffset);
    for (let i = 0; i < values.length; i++) {
      if (f64) view.setFloat64(i * 8, values[i], true);
      else view.setFloat32(i * 4, values[i], true);
    }
  }
  return [header, payload];
}

export function writeDivp(file: string, values: TypedMatrix, shape: Shape): void {
  const fd = fs.openSync(file, "w");
  try {
    fs.writevSync(fd, encodeDivpParts(values, shape));
  } finally {
    fs.closeSync(fd);
  }
}

export function decodeDivp(buf: Buffer): DecodedMatrix {
  if (buf.length < HEADER_BYTES) {
    throw new DivPruneError("MalformedHeader", `file too short (${buf.length} bytes)`, 2);
  }
  if (buf.toString("ascii", 0, 4) !== DIVP_MAGIC) {
    throw new DivPruneError("MalformedHeader", "bad magic", 2);
  }
  const version = buf.readUInt16LE(4);
  if (version !== DIVP_VERSION) {
    throw new DivPruneError("MalformedHeader", `unsupported version ${version}`, 2);
  }
  const dtypeByte = buf.readUInt8(6);
  if (dtypeByte !== 0 && dtypeByte !== 1) {
    throw new DivPruneError("MalformedHeader", `unknown dtype ${dtypeByte}`, 2);
  }
  if (buf.readUInt8(7) !== 0) {
    throw new DivPruneError("MalformedHeader", "reserved byte set", 2);
  }
  const rows = buf.readUInt32LE(8);
  const cols = buf.readUInt32LE(12);
  const itemSize = dtypeByte === 1 ? 8 : 4;
  const expected = HEADER_BYTES + rows * cols * itemSize;
  if (buf.length !== expected) {
    throw new DivPruneError(
      "MalformedHeader",
      `payload size mismatch: expected ${expected} bytes, got ${buf.length}`,
      2,
    );
  }

  // slice() realigns; pooled read buffers need not be 8-byte aligned.
  const payload = buf.buffer.slice(buf.byteOffset + HEADER_BYTES, buf.byteOffset + expected);
  const values = new Float64Array(rows * cols);
  const view = new DataView(payload);
  for (let i = 0; i < values.length; i++) {
    values[i] = dtypeByte === 1 ? view.getFloat64(i * 8, true) : view.getFloat32(i * 4, true);
  }
  return { rows, cols, dtype: dtypeByte === 1 ? "f64" : "f32", values };
}

export function readDivp(file: string): DecodedMatrix {
  let buf: Buffer;
  try {
    buf = fs.readFileSync(file);
  } catch (err) {
    throw new DivPruneError("IoError", `cannot read ${file}: ${(err as Error).message}`, 2);
  }
  return decodeDivp(buf);
}
