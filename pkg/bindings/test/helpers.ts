import { spawnSync } from "node:child_process";
import { createHash } from "node:crypto";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { fileURLToPath } from "node:url";

/** Directory that setup.ts populates before any test runs. */
export const FIXTURES_DIR = path.join(path.dirname(fileURLToPath(import.meta.url)), ".fixtures");

/** Absolute path of a fixture file. */
export function fixture(name: string): string {
  return path.join(FIXTURES_DIR, name);
}

/** Fresh scratch directory for a test's own outputs. */
export function scratchDir(): string {
  return fs.mkdtempSync(path.join(os.tmpdir(), "tg-bindings-"));
}

export function sha256File(filePath: string): string {
  return createHash("sha256").update(fs.readFileSync(filePath)).digest("hex");
}

export interface RawRun {
  stdout: string;
  stderr: string;
  status: number;
}

/**
 * Invoke the tool directly, bypassing the bindings, so parity tests compare
 * binding results against an independent invocation.
 */
export function rawTool(args: string[]): RawRun {
  const proc = spawnSync(process.env["TONGUEGRAFT_BIN"] ?? "tonguegraft", args, {
    encoding: "utf-8",
    maxBuffer: 256 * 1024 * 1024,
  });
  if (proc.error) {
    throw proc.error;
  }
  return { stdout: proc.stdout ?? "", stderr: proc.stderr ?? "", status: proc.status ?? -1 };
}
