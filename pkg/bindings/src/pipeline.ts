/**
 * Data pipeline bindings: mixture planning and parallel-corpus formatting.
 *
 * Both operations delegate to the tool and exchange data through its plan
 * and document-stream file formats, which are parsed here for convenience.
 */

import * as fs from "node:fs";

import { runTool } from "./cli.js";

/** Example formats accepted by format-parallel. */
export type ExampleFormat = "ntp" | "ti";

/** Schedule modes accepted by format-parallel. */
export type ScheduleMode = "two-staged" | "mixed";

/** Summary of a mixture plan, parsed from the tool's output. */
export interface PlanSummary {
  /** Exact per-source token budgets. */
  budgets: Record<string, number>;
  /** Number of realized plan rows; undefined for a budgets-only plan. */
  planItems?: number;
  /** Where the plan file was written. */
  planPath: string;
}

export interface PlanMixtureOptions {
  /** Tokenizer model used to count document tokens when sources have paths. */
  model?: string;
  /** Override the interleave seed from the config. */
  seed?: number;
}

/**
 * Apportion a token budget across corpus sources and write the plan file,
 * via `tonguegraft mix`. The config file's mixture section defines sources,
 * weights, caps, and the total token budget.
 */
export function planMixture(
  configPath: string,
  outPath: string,
  options: PlanMixtureOptions = {},
): PlanSummary {
  const args = ["mix", `--config=${configPath}`, `--out=${outPath}`];
  if (options.model !== undefined) {
    args.push(`--model=${options.model}`);
  }
  if (options.seed !== undefined) {
    args.push(`--seed=${options.seed}`);
  }
  const { stdout } = runTool(args);
  const budgets: Record<string, number> = {};
  let planItems: number | undefined;
  for (const line of stdout.split("\n")) {
    const fields = line.split("\t");
    if (fields[0] === "budget" && fields.length === 3) {
      budgets[fields[1] as string] = Number(fields[2]);
    } else if (fields[0] === "plan_items" && fields.length === 2) {
      planItems = Number(fields[1]);
    }
  }
  const summary: PlanSummary = { budgets, planPath: outPath };
  if (planItems !== undefined) {
    summary.planItems = planItems;
  }
  return summary;
}

export interface FormatParallelOptions {
  /** Compose the formatted examples with a plain document stream. */
  schedule?: ScheduleMode;
  /** Plain document stream path; required with schedule. */
  plain?: string;
  /** Interleave seed for mixed scheduling. */
  seed?: number;
}

/**
 * Turn a tab-separated sentence-pair file into a training document stream,
 * via `tonguegraft format-parallel`. Each pair yields one example per
 * translation direction; the "ti" format prepends the instruction line and
 * masks loss to the target sentence.
 */
export function formatParallel(
  pairsPath: string,
  modelPath: string,
  format: ExampleFormat,
  outPath: string,
  options: FormatParallelOptions = {},
): void {
  const args = [
    "format-parallel",
    `--pairs=${pairsPath}`,
    `--model=${modelPath}`,
    `--format=${format}`,
    `--out=${outPath}`,
  ];
  if (options.schedule !== undefined) {
    args.push(`--schedule=${options.schedule}`);
  }
  if (options.plain !== undefined) {
    args.push(`--plain=${options.plain}`);
  }
  if (options.seed !== undefined) {
    args.push(`--seed=${options.seed}`);
  }
  runTool(args);
}

/** One document of a training stream: token ids plus a parallel loss mask. */
export interface StreamDoc {
  origin: string;
  tokenIds: number[];
  lossMask: number[];
}

/** Parse a document-stream file (origin, ids, mask, tab separated). */
export function readStream(path: string): StreamDoc[] {
  const docs: StreamDoc[] = [];
  const text = fs.readFileSync(path, "utf-8");
  for (const [index, line] of text.split("\n").entries()) {
    if (line.length === 0) {
      continue;
    }
    const fields = line.split("\t");
    if (fields.length !== 3) {
      throw new Error(`${path}:${index + 1}: malformed stream row`);
    }
    docs.push({
      origin: fields[0] as string,
      tokenIds: parseIntList(fields[1] as string),
      lossMask: parseIntList(fields[2] as string),
    });
  }
  return docs;
}

/** A parsed mixture plan file: header metadata plus realized rows. */
export interface PlanFile {
  /** Interleave seed, or null when the plan was built without one. */
  seed: number | null;
  totalTokens: number;
  budgets: Record<string, number>;
  /** Realized (sourceId, docRef) rows in emission order. */
  items: Array<{ sourceId: string; docRef: number }>;
}

/** Parse a plan file written by `tonguegraft mix`. */
export function readPlan(path: string): PlanFile {
  const text = fs.readFileSync(path, "utf-8");
  const plan: PlanFile = { seed: null, totalTokens: 0, budgets: {}, items: [] };
  for (const [index, line] of text.split("\n").entries()) {
    if (line.length === 0) {
      continue;
    }
    const fields = line.split("\t");
    if (fields[0] === "#mixture-plan") {
      continue;
    }
    if (fields[0] === "#seed") {
      plan.seed = fields[1] === "None" ? null : Number(fields[1]);
    } else if (fields[0] === "#total_tokens") {
      plan.totalTokens = Number(fields[1]);
    } else if (fields[0] === "#budget" && fields.length === 3) {
      plan.budgets[fields[1] as string] = Number(fields[2]);
    } else if (fields.length === 2 && !line.startsWith("#")) {
      plan.items.push({ sourceId: fields[0] as string, docRef: Number(fields[1]) });
    } else {
      throw new Error(`${path}:${index + 1}: malformed plan row`);
    }
  }
  return plan;
}

function parseIntList(field: string): number[] {
  if (field.length === 0) {
    return [];
  }
  return field.split(" ").map(Number);
}
