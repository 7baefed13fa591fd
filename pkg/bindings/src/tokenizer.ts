/**
 * Tokenizer bindings.
 *
 * A BoundTokenizer is an opaque handle to a tokenizer model file. Results are
 * produced by the `tonguegraft tokenize` subcommand, so they match the
 * command line byte for byte. Handles are immutable and safe to share.
 */

import { runTool } from "./cli.js";

export class BoundTokenizer {
  /** Path of the tokenizer model JSON this handle is bound to. */
  readonly modelPath: string;

  constructor(modelPath: string) {
    this.modelPath = modelPath;
  }

  /**
   * Encode a string to token ids.
   *
   * Text is normalized by the tool before segmentation; characters outside
   * the vocabulary fall back to byte tokens.
   */
  encode(text: string): number[] {
    const { stdout } = runTool([
      "tokenize",
      `--model=${this.modelPath}`,
      `--text=${text}`,
    ]);
    return parseIdLine(stdout);
  }

  /** Encode the contents of a UTF-8 text file. */
  encodeFile(path: string): number[] {
    const { stdout } = runTool([
      "tokenize",
      `--model=${this.modelPath}`,
      `--file=${path}`,
    ]);
    return parseIdLine(stdout);
  }

  /**
   * Decode token ids back to text.
   *
   * Byte-token runs that do not form valid UTF-8 come back with replacement
   * characters, exactly as the command line prints them. An empty id list
   * decodes to the empty string without a tool call, since the command line
   * requires at least one id.
   */
  decode(ids: readonly number[]): string {
    if (ids.length === 0) {
      return "";
    }
    const { stdout } = runTool([
      "tokenize",
      `--model=${this.modelPath}`,
      `--ids=${ids.join(" ")}`,
    ]);
    return stdout.replace(/\n$/, "");
  }
}

function parseIdLine(stdout: string): number[] {
  const line = stdout.trim();
  if (line.length === 0) {
    return [];
  }
  return line.split(/\s+/).map((field) => {
    const id = Number(field);
    if (!Number.isInteger(id) || id < 0) {
      throw new Error(`unexpected token id in tool output: ${field}`);
    }
    return id;
  });
}
