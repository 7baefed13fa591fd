/**
 * Builds the shared fixture set once before the suites run. Everything goes
 * through the tool's command line and file formats: two tokenizers are
 * trained, the base is expanded with the donor's vocabulary, and a
 * deterministic base embedding matrix is generated for the surgery tests.
 */

import { execFileSync } from "node:child_process";
import * as fs from "node:fs";
import * as path from "node:path";
import { fileURLToPath } from "node:url";

import { tgemFromValues, writeTgemFile } from "../src/matrix.js";

const FIXTURES_DIR = path.join(path.dirname(fileURLToPath(import.meta.url)), ".fixtures");
const EMBED_DIM = 16;

const ASCII_LINES = [
  "the quick brown fox jumps over the lazy dog",
  "a tokenizer splits text into subword units",
  "training data quality matters more than quantity",
  "the model reads the same bytes every run",
  "short sentences keep the test corpus small",
  "every line here stays within plain ascii",
  "merge rules grow from pair frequencies",
  "the vocabulary stops growing at the target",
  "deterministic output makes quick debugging easy",
  "frequent pairs merge before rare pairs",
  "the fox and the dog meet again at dawn",
  "quality text beats quantity every time",
];

const CJK_LINES = [
  "猫犬鳥魚山川空雨",
  "花草木石金日月星",
  "海波田村道穴戸手",
  "猫山猫川猫空猫雨猫花",
  "犬山犬川犬道犬村",
  "鳥空鳥星鳥月鳥日",
  "魚海魚波魚川魚田",
  "山川田村道金石木",
  "花鳥風月雪空海山",
  "猫犬猫犬猫犬山川",
  "日月星空海波田道",
  "草木花石金手戸穴風雪",
];

const PAIR_LINES = [
  "猫犬鳥\tthe cat the dog the bird",
  "山川海\tmountain river sea",
  "日月星空\tsun moon stars sky",
  "花草木\tflowers grass trees",
];

const WEB_DOCS = [
  "the quick brown fox jumps over the lazy dog",
  "merge rules grow from pair frequencies",
  "every line here stays within plain ascii",
  "short sentences keep the test corpus small",
  "the model reads the same bytes every run",
  "quality text beats quantity every time",
  "frequent pairs merge before rare pairs",
  "the fox and the dog meet again at dawn",
];

const BOOKS_DOCS = [
  "once upon a time a fox lived in the woods",
  "the river ran past the quiet village",
  "a long journey starts with a single step",
  "the moon rose over the silver sea",
];

const CODE_DOCS = [
  "for i in range(10): print(i)",
  "def add(a, b): return a + b",
  "while True: break",
  "x = [n * n for n in items]",
];

function tool(...args: string[]): void {
  execFileSync(process.env["TONGUEGRAFT_BIN"] ?? "tonguegraft", args, {
    stdio: ["ignore", "ignore", "inherit"],
  });
}

function write(name: string, lines: string[]): string {
  const p = path.join(FIXTURES_DIR, name);
  fs.writeFileSync(p, lines.join("\n") + "\n");
  return p;
}

function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export default function setup(): void {
  fs.rmSync(FIXTURES_DIR, { recursive: true, force: true });
  fs.mkdirSync(FIXTURES_DIR, { recursive: true });

  const ascii = write("ascii_corpus.txt", ASCII_LINES);
  const cjk = write("cjk_corpus.txt", CJK_LINES);
  write("pairs.tsv", PAIR_LINES);
  write("docs_web.txt", WEB_DOCS);
  write("docs_books.txt", BOOKS_DOCS);
  write("docs_code.txt", CODE_DOCS);

  const base = path.join(FIXTURES_DIR, "base.json");
  const donor = path.join(FIXTURES_DIR, "donor.json");
  const addition = path.join(FIXTURES_DIR, "addition.json");
  const expanded = path.join(FIXTURES_DIR, "expanded.json");
  tool("train-vocab", `--corpus=${ascii}`, "--target=64", `--out=${base}`);
  tool("train-vocab", `--corpus=${cjk}`, "--target=64", `--out=${donor}`);
  tool(
    "expand",
    `--base=${base}`,
    `--donor=${donor}`,
    `--out-addition=${addition}`,
    `--out-model=${expanded}`,
  );

  const baseVocabSize = JSON.parse(fs.readFileSync(base, "utf-8")).tokens.length as number;
  const rand = mulberry32(20260819);
  const values = new Float32Array(baseVocabSize * EMBED_DIM);
  for (let i = 0; i < values.length; i++) {
    values[i] = Math.fround(rand() * 2 - 1);
  }
  writeTgemFile(
    path.join(FIXTURES_DIR, "base.tgem"),
    tgemFromValues(baseVocabSize, EMBED_DIM, values),
  );

  const mixture = {
    total_tokens: 10_000,
    seed: 11,
    sources: [
      { id: "web", weight: 0.9, path: "docs_web.txt" },
      { id: "books", weight: 0.05, path: "docs_books.txt" },
      { id: "code", weight: 0.05, path: "docs_code.txt" },
    ],
  };
  fs.writeFileSync(
    path.join(FIXTURES_DIR, "mixcfg.json"),
    JSON.stringify({ mixture }, null, 2) + "\n",
  );
  const budgetsOnly = {
    total_tokens: 10_000,
    seed: 11,
    sources: mixture.sources.map(({ id, weight }) => ({ id, weight })),
  };
  fs.writeFileSync(
    path.join(FIXTURES_DIR, "mixcfg_budgets_only.json"),
    JSON.stringify({ mixture: budgetsOnly }, null, 2) + "\n",
  );
}
