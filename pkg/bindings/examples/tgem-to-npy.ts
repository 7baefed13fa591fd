/** Convert a TGEM embedding matrix to a NumPy .npy file. */

import { readTgemFile } from "../src/matrix.js";
import { tgemFileToNpy } from "../src/convert.js";

const [src, dst] = process.argv.slice(2);
if (!src || !dst) {
  console.error("usage: tgem-to-npy <in.tgem> <out.npy>");
  process.exit(2);
}
const { rows, cols } = readTgemFile(src);
tgemFileToNpy(src, dst);
console.log(`${dst}\t${rows}x${cols} f32`);
