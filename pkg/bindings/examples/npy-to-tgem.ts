/** Convert a 2-D little-endian f32 NumPy .npy file to a TGEM matrix. */

import { npyFileToTgem } from "../src/convert.js";
import { readTgemFile } from "../src/matrix.js";

const [src, dst] = process.argv.slice(2);
if (!src || !dst) {
  console.error("usage: npy-to-tgem <in.npy> <out.tgem>");
  process.exit(2);
}
npyFileToTgem(src, dst);
const { rows, cols } = readTgemFile(dst);
console.log(`${dst}\t${rows}x${cols} f32`);
