/** Extract an f32 tensor from a safetensors file into a TGEM matrix. */

import { safetensorsFileToTgem } from "../src/convert.js";
import { readTgemFile } from "../src/matrix.js";

const [src, dst, name] = process.argv.slice(2);
if (!src || !dst) {
  console.error("usage: safetensors-to-tgem <in.safetensors> <out.tgem> [tensor-name]");
  process.exit(2);
}
safetensorsFileToTgem(src, dst, name);
const { rows, cols } = readTgemFile(dst);
console.log(`${dst}\t${rows}x${cols} f32`);
