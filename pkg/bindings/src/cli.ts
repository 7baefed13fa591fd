/**
 * Subprocess plumbing shared by every binding.
 *
 * All operations delegate to the `tonguegraft` command line tool; nothing is
 * reimplemented here. The executable is resolved from PATH, or from the
 * TONGUEGRAFT_BIN environment variable when set.
 */

import { spawnSync } from "node:child_process";

/** Captured output of one tool invocation that exited 0. */
export interface ToolResult {
  stdout: string;
  stderr: string;
}

/**
 * Raised when the tool exits nonzero. The message carries the tool's own
 * error text; the full stderr and the exit code are kept for callers that
 * need to distinguish usage errors (exit 2) from domain errors (exit 1).
 */
export class ToolError extends Error {
  readonly exitCode: number;
  readonly stderr: string;

  constructor(argv: readonly string[], exitCode: number, stderr: string) {
    super(extractErrorText(stderr) ?? `tonguegraft ${argv[0] ?? ""} exited with code ${exitCode}`);
    this.name = "ToolError";
    this.exitCode = exitCode;
    this.stderr = stderr;
  }
}

function extractErrorText(stderr: string): string | undefined {
  for (const line of stderr.split("\n")) {
    const at = line.indexOf("error: ");
    if (at === 0 || (at > 0 && line.startsWith("tonguegraft"))) {
      return line.slice(at + "error: ".length).trim() || undefined;
    }
  }
  const tail = stderr
    .split("\n")
    .map((l) => l.trim())
    .filter((l) => l.length > 0)
    .pop();
  return tail;
}

/** Name or path of the executable the bindings will spawn. */
export function toolExecutable(): string {
  return process.env["TONGUEGRAFT_BIN"] ?? "tonguegraft";
}

/**
 * Run one tool subcommand and return its captured output.
 *
 * @throws ToolError when the tool exits nonzero, carrying its stderr text.
 */
export function runTool(args: readonly string[]): ToolResult {
  const proc = spawnSync(toolExecutable(), args as string[], {
    encoding: "utf-8",
    maxBuffer: 256 * 1024 * 1024,
  });
  if (proc.error) {
    throw proc.error;
  }
  if (proc.status !== 0) {
    throw new ToolError(args, proc.status ?? -1, proc.stderr ?? "");
  }
  return { stdout: proc.stdout ?? "", stderr: proc.stderr ?? "" };
}
