import { execFileSync } from "node:child_process";
import * as fs from "node:fs";
import * as path from "node:path";

import { describe, expect, it } from "vitest";

import {
  npyBytesToTgem,
  npyFileToTgem,
  safetensorsBytesToTgem,
  tgemFileToNpy,
  tgemFileToSafetensors,
  safetensorsFileToTgem,
  tgemToNpyBytes,
  tgemToSafetensorsBytes,
} from "../src/convert.js";
import { TgemFormatError, readTgemFile, tgemValues } from "../src/matrix.js";
import { fixture, scratchDir, sha256File } from "./helpers.js";

describe("npy conversion", () => {
  it("round trips the fixture matrix byte for byte", () => {
    const dir = scratchDir();
    const npy = path.join(dir, "m.npy");
    const back = path.join(dir, "m.tgem");
    tgemFileToNpy(fixture("base.tgem"), npy);
    npyFileToTgem(npy, back);
    expect(sha256File(back)).toBe(sha256File(fixture("base.tgem")));
  });

  it("produces a file numpy loads with identical bytes and shape", () => {
    const dir = scratchDir();
    const npy = path.join(dir, "m.npy");
    tgemFileToNpy(fixture("base.tgem"), npy);
    const matrix = readTgemFile(fixture("base.tgem"));
    const report = execFileSync(
      "python3",
      [
        "-c",
        "import hashlib, sys, numpy as np\n" +
          "a = np.load(sys.argv[1])\n" +
          "print(a.dtype, a.shape[0], a.shape[1], hashlib.sha256(a.tobytes()).hexdigest())",
        npy,
      ],
      { encoding: "utf-8" },
    ).trim();
    const [dtype, rows, cols, digest] = report.split(" ");
    expect(dtype).toBe("float32");
    expect(Number(rows)).toBe(matrix.rows);
    expect(Number(cols)).toBe(matrix.cols);
    const payloadDigest = execFileSync(
      "python3",
      ["-c", "import hashlib, sys\nprint(hashlib.sha256(open(sys.argv[1],'rb').read()[24:]).hexdigest())", fixture("base.tgem")],
      { encoding: "utf-8" },
    ).trim();
    expect(digest).toBe(payloadDigest);
  });

  it("parses a file numpy wrote", () => {
    const dir = scratchDir();
    const npy = path.join(dir, "ref.npy");
    execFileSync("python3", [
      "-c",
      "import sys, numpy as np\n" +
        "np.save(sys.argv[1], np.arange(12, dtype='<f4').reshape(3, 4))",
      npy,
    ]);
    const matrix = npyBytesToTgem(fs.readFileSync(npy));
    expect(matrix.rows).toBe(3);
    expect(matrix.cols).toBe(4);
    expect(Array.from(tgemValues(matrix))).toEqual([...Array(12).keys()]);
  });

  it("rejects non-f32 and non-2-D arrays", () => {
    const dir = scratchDir();
    const f8 = path.join(dir, "f8.npy");
    const d1 = path.join(dir, "d1.npy");
    execFileSync("python3", [
      "-c",
      "import sys, numpy as np\n" +
        "np.save(sys.argv[1], np.zeros((2, 2), dtype='<f8'))\n" +
        "np.save(sys.argv[2], np.zeros(4, dtype='<f4'))",
      f8,
      d1,
    ]);
    expect(() => npyBytesToTgem(fs.readFileSync(f8))).toThrowError(/<f4/);
    expect(() => npyBytesToTgem(fs.readFileSync(d1))).toThrowError(/2-D/);
    expect(() => npyBytesToTgem(Buffer.from("junk"))).toThrowError(TgemFormatError);
  });
});

describe("safetensors conversion", () => {
  it("round trips the fixture matrix byte for byte", () => {
    const dir = scratchDir();
    const st = path.join(dir, "m.safetensors");
    const back = path.join(dir, "m.tgem");
    tgemFileToSafetensors(fixture("base.tgem"), st, "tok_embeddings.weight");
    safetensorsFileToTgem(st, back, "tok_embeddings.weight");
    expect(sha256File(back)).toBe(sha256File(fixture("base.tgem")));
  });

  it("lays out the header and payload per the safetensors format", () => {
    const matrix = readTgemFile(fixture("base.tgem"));
    const bytes = tgemToSafetensorsBytes(matrix);
    const headerLength = Number(bytes.readBigUInt64LE(0));
    const header = JSON.parse(bytes.subarray(8, 8 + headerLength).toString("utf-8"));
    expect(header.embedding.dtype).toBe("F32");
    expect(header.embedding.shape).toEqual([matrix.rows, matrix.cols]);
    expect(header.embedding.data_offsets).toEqual([0, matrix.payload.length]);
    expect(bytes.subarray(8 + headerLength).equals(matrix.payload)).toBe(true);
  });

  it("extracts the sole tensor when no name is given", () => {
    const matrix = readTgemFile(fixture("base.tgem"));
    const bytes = tgemToSafetensorsBytes(matrix, "anything");
    const parsed = safetensorsBytesToTgem(bytes);
    expect(parsed.rows).toBe(matrix.rows);
    expect(parsed.payload.equals(matrix.payload)).toBe(true);
  });

  it("rejects a missing tensor name and truncated buffers", () => {
    const matrix = readTgemFile(fixture("base.tgem"));
    const bytes = tgemToSafetensorsBytes(matrix, "weight");
    expect(() => safetensorsBytesToTgem(bytes, "missing")).toThrowError(/no tensor named/);
    expect(() => safetensorsBytesToTgem(bytes.subarray(0, 4))).toThrowError(/too short/);
  });
});
