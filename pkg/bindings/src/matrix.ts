/**
 * TGEM matrix file access and embedding surgery bindings.
 *
 * TGEM is the tool's embedding matrix format: a 24 byte header (magic "TGEM",
 * little-endian u32 version 1, u64 rows, u64 cols) followed by rows*cols
 * little-endian IEEE-754 32-bit values in row-major order.
 *
 * Reading and writing are done here so downstream stacks can move matrices
 * in and out without spawning anything; the actual surgery (mean
 * initialization of added rows) always delegates to the tool.
 */

import * as fs from "node:fs";

import { runTool } from "./cli.js";

const MAGIC = "TGEM";
const HEADER_BYTES = 24;

/** Raised when a buffer does not parse as a TGEM file. */
export class TgemFormatError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "TgemFormatError";
  }
}

/**
 * An opaque handle to a parsed matrix. The payload holds the raw value bytes
 * exactly as stored, so writing a handle back produces an identical file.
 */
export interface BoundMatrix {
  readonly rows: number;
  readonly cols: number;
  readonly payload: Buffer;
}

/** Parse a TGEM byte buffer, validating magic, version, and size. */
export function parseTgem(buf: Buffer): BoundMatrix {
  if (buf.length < HEADER_BYTES) {
    throw new TgemFormatError(`file too short for a TGEM header: ${buf.length} bytes`);
  }
  const magic = buf.subarray(0, 4).toString("latin1");
  if (magic !== MAGIC) {
    throw new TgemFormatError(`bad magic: expected ${JSON.stringify(MAGIC)}, got ${JSON.stringify(magic)}`);
  }
  const version = buf.readUInt32LE(4);
  if (version !== 1) {
    throw new TgemFormatError(`unsupported TGEM version: ${version}`);
  }
  const rows = toSafeCount(buf.readBigUInt64LE(8), "rows");
  const cols = toSafeCount(buf.readBigUInt64LE(16), "cols");
  const expected = HEADER_BYTES + rows * cols * 4;
  if (buf.length !== expected) {
    throw new TgemFormatError(
      `payload size mismatch: ${rows}x${cols} needs ${expected} bytes, file has ${buf.length}`,
    );
  }
  return { rows, cols, payload: buf.subarray(HEADER_BYTES) };
}

/** Serialize a matrix handle back to TGEM bytes. */
export function buildTgem(matrix: BoundMatrix): Buffer {
  if (matrix.payload.length !== matrix.rows * matrix.cols * 4) {
    throw new TgemFormatError(
      `payload holds ${matrix.payload.length} bytes, expected ${matrix.rows * matrix.cols * 4}`,
    );
  }
  const header = Buffer.alloc(HEADER_BYTES);
  header.write(MAGIC, 0, "latin1");
  header.writeUInt32LE(1, 4);
  header.writeBigUInt64LE(BigInt(matrix.rows), 8);
  header.writeBigUInt64LE(BigInt(matrix.cols), 16);
  return Buffer.concat([header, matrix.payload]);
}

/** Read a TGEM file from disk. */
export function readTgemFile(path: string): BoundMatrix {
  return parseTgem(fs.readFileSync(path));
}

/** Write a matrix handle to disk as a TGEM file. */
export function writeTgemFile(path: string, matrix: BoundMatrix): void {
  fs.writeFileSync(path, buildTgem(matrix));
}

/** Decode the payload to numbers, reading each value as little-endian f32. */
export function tgemValues(matrix: BoundMatrix): Float32Array {
  const n = matrix.rows * matrix.cols;
  const view = new DataView(
    matrix.payload.buffer,
    matrix.payload.byteOffset,
    matrix.payload.byteLength,
  );
  const values = new Float32Array(n);
  for (let i = 0; i < n; i++) {
    values[i] = view.getFloat32(i * 4, true);
  }
  return values;
}

/** Build a matrix handle from values, encoding each as little-endian f32. */
export function tgemFromValues(rows: number, cols: number, values: Float32Array): BoundMatrix {
  if (values.length !== rows * cols) {
    throw new TgemFormatError(`got ${values.length} values for a ${rows}x${cols} matrix`);
  }
  const payload = Buffer.alloc(values.length * 4);
  for (let i = 0; i < values.length; i++) {
    payload.writeFloatLE(values[i] ?? 0, i * 4);
  }
  return { rows, cols, payload };
}

/**
 * Grow a base embedding matrix with mean-initialized rows for an addition
 * set, via `tonguegraft init-embeddings`. Base rows are copied bit exactly;
 * each new row is the mean of its constituents' base rows.
 *
 * Not reentrant on the same output path.
 */
export function meanInit(baseMatrixPath: string, additionPath: string, outPath: string): void {
  runTool([
    "init-embeddings",
    `--base-matrix=${baseMatrixPath}`,
    `--addition=${additionPath}`,
    `--out=${outPath}`,
  ]);
}

function toSafeCount(value: bigint, what: string): number {
  if (value > BigInt(Number.MAX_SAFE_INTEGER)) {
    throw new TgemFormatError(`${what} out of range: ${value}`);
  }
  return Number(value);
}
