/**
 * Converters between TGEM and common checkpoint tensor layouts.
 *
 * Two targets are supported: NumPy .npy files (format versions 1 and 2) and
 * single-tensor safetensors files. Both store row-major little-endian f32
 * data, the same layout TGEM uses, so conversion copies the value bytes
 * verbatim and every round trip is bit exact.
 */

import * as fs from "node:fs";

import { BoundMatrix, TgemFormatError, parseTgem, buildTgem } from "./matrix.js";

const NPY_MAGIC = Buffer.from("\x93NUMPY", "latin1");

/** Serialize a matrix as a NumPy .npy (format version 1.0) byte buffer. */
export function tgemToNpyBytes(matrix: BoundMatrix): Buffer {
  let header = `{'descr': '<f4', 'fortran_order': False, 'shape': (${matrix.rows}, ${matrix.cols}), }`;
  const unpadded = NPY_MAGIC.length + 4 + header.length + 1;
  header = header + " ".repeat((64 - (unpadded % 64)) % 64) + "\n";
  const prefix = Buffer.alloc(NPY_MAGIC.length + 4);
  NPY_MAGIC.copy(prefix, 0);
  prefix.writeUInt8(1, 6);
  prefix.writeUInt8(0, 7);
  prefix.writeUInt16LE(header.length, 8);
  return Buffer.concat([prefix, Buffer.from(header, "latin1"), matrix.payload]);
}

/** Parse a NumPy .npy byte buffer holding a 2-D little-endian f32 array. */
export function npyBytesToTgem(buf: Buffer): BoundMatrix {
  if (buf.length < 10 || !buf.subarray(0, 6).equals(NPY_MAGIC)) {
    throw new TgemFormatError("not a .npy file: bad magic");
  }
  const major = buf.readUInt8(6);
  let headerLength: number;
  let headerStart: number;
  if (major === 1) {
    headerLength = buf.readUInt16LE(8);
    headerStart = 10;
  } else if (major === 2) {
    headerLength = buf.readUInt32LE(8);
    headerStart = 12;
  } else {
    throw new TgemFormatError(`unsupported .npy format version: ${major}`);
  }
  const header = buf.subarray(headerStart, headerStart + headerLength).toString("latin1");
  const descr = header.match(/'descr'\s*:\s*'([^']*)'/);
  if (!descr || descr[1] !== "<f4") {
    throw new TgemFormatError(`expected little-endian f32 ('<f4'), got ${descr?.[1] ?? "?"}`);
  }
  if (!/'fortran_order'\s*:\s*False/.test(header)) {
    throw new TgemFormatError("expected C-order (fortran_order False)");
  }
  const shape = header.match(/'shape'\s*:\s*\((\d+)\s*,\s*(\d+)\s*,?\s*\)/);
  if (!shape) {
    throw new TgemFormatError(`expected a 2-D shape, header was: ${header.trim()}`);
  }
  const rows = Number(shape[1]);
  const cols = Number(shape[2]);
  const payload = buf.subarray(headerStart + headerLength);
  if (payload.length !== rows * cols * 4) {
    throw new TgemFormatError(
      `payload size mismatch: ${rows}x${cols} needs ${rows * cols * 4} bytes, got ${payload.length}`,
    );
  }
  return { rows, cols, payload };
}

/** Serialize a matrix as a single-tensor safetensors byte buffer. */
export function tgemToSafetensorsBytes(matrix: BoundMatrix, name = "embedding"): Buffer {
  const header = JSON.stringify({
    [name]: {
      dtype: "F32",
      shape: [matrix.rows, matrix.cols],
      data_offsets: [0, matrix.payload.length],
    },
  });
  const prefix = Buffer.alloc(8);
  prefix.writeBigUInt64LE(BigInt(Buffer.byteLength(header)), 0);
  return Buffer.concat([prefix, Buffer.from(header, "utf-8"), matrix.payload]);
}

/**
 * Parse a safetensors byte buffer into a matrix handle.
 *
 * When name is omitted the file must hold exactly one tensor (metadata
 * entries aside); otherwise the named tensor is extracted.
 */
export function safetensorsBytesToTgem(buf: Buffer, name?: string): BoundMatrix {
  if (buf.length < 8) {
    throw new TgemFormatError("not a safetensors file: too short");
  }
  const headerLength = Number(buf.readBigUInt64LE(0));
  if (8 + headerLength > buf.length) {
    throw new TgemFormatError("not a safetensors file: header overruns the buffer");
  }
  let doc: Record<string, { dtype: string; shape: number[]; data_offsets: [number, number] }>;
  try {
    doc = JSON.parse(buf.subarray(8, 8 + headerLength).toString("utf-8"));
  } catch (exc) {
    throw new TgemFormatError(`not a safetensors file: ${String(exc)}`);
  }
  const tensorNames = Object.keys(doc).filter((k) => k !== "__metadata__");
  const picked = name ?? (tensorNames.length === 1 ? tensorNames[0] : undefined);
  if (picked === undefined || !(picked in doc)) {
    throw new TgemFormatError(
      name === undefined
        ? `expected exactly one tensor, found: ${tensorNames.join(", ")}`
        : `no tensor named ${JSON.stringify(name)} in: ${tensorNames.join(", ")}`,
    );
  }
  const entry = doc[picked]!;
  if (entry.dtype !== "F32") {
    throw new TgemFormatError(`expected dtype F32, got ${entry.dtype}`);
  }
  if (!Array.isArray(entry.shape) || entry.shape.length !== 2) {
    throw new TgemFormatError(`expected a 2-D tensor, shape was: ${JSON.stringify(entry.shape)}`);
  }
  const [rows, cols] = entry.shape as [number, number];
  const [begin, end] = entry.data_offsets;
  const payload = buf.subarray(8 + headerLength + begin, 8 + headerLength + end);
  if (payload.length !== rows * cols * 4 || end - begin !== payload.length) {
    throw new TgemFormatError(
      `payload size mismatch: ${rows}x${cols} needs ${rows * cols * 4} bytes, offsets span ${end - begin}`,
    );
  }
  return { rows, cols, payload };
}

/** Read a TGEM file and write it as .npy. */
export function tgemFileToNpy(tgemPath: string, npyPath: string): void {
  fs.writeFileSync(npyPath, tgemToNpyBytes(parseTgem(fs.readFileSync(tgemPath))));
}

/** Read a .npy file and write it as TGEM. */
export function npyFileToTgem(npyPath: string, tgemPath: string): void {
  fs.writeFileSync(tgemPath, buildTgem(npyBytesToTgem(fs.readFileSync(npyPath))));
}

/** Read a TGEM file and write it as safetensors. */
export function tgemFileToSafetensors(tgemPath: string, stPath: string, name?: string): void {
  fs.writeFileSync(stPath, tgemToSafetensorsBytes(parseTgem(fs.readFileSync(tgemPath)), name));
}

/** Read a safetensors file and write the (single or named) tensor as TGEM. */
export function safetensorsFileToTgem(stPath: string, tgemPath: string, name?: string): void {
  fs.writeFileSync(tgemPath, buildTgem(safetensorsBytesToTgem(fs.readFileSync(stPath), name)));
}
