/** Convert a TGEM embedding matrix to a single-tensor safetensors file. */

import { readTgemFile } from "../src/matrix.js";
import { tgemFileToSafetensors } from "../src/convert.js";

const [src, dst, name] = process.argv.slice(2);
if (!src || !dst) {
  console.error("usage: tgem-to-safetensors <in.tgem> <out.safetensors> [tensor-name]");
  process.exit(2);
}
const { rows, cols } = readTgemFile(src);
tgemFileToSafetensors(src, dst, name);
console.log(`${dst}\t${name ?? "embedding"}\t${rows}x${cols} f32`);
