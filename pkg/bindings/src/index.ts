export { ToolError, runTool, toolExecutable } from "./cli.js";
export type { ToolResult } from "./cli.js";
export { BoundTokenizer } from "./tokenizer.js";
export {
  TgemFormatError,
  buildTgem,
  meanInit,
  parseTgem,
  readTgemFile,
  tgemFromValues,
  tgemValues,
  writeTgemFile,
} from "./matrix.js";
export type { BoundMatrix } from "./matrix.js";
export { formatParallel, planMixture, readPlan, readStream } from "./pipeline.js";
export type {
  ExampleFormat,
  FormatParallelOptions,
  PlanFile,
  PlanMixtureOptions,
  PlanSummary,
  ScheduleMode,
  StreamDoc,
} from "./pipeline.js";
export {
  npyBytesToTgem,
  npyFileToTgem,
  safetensorsBytesToTgem,
  safetensorsFileToTgem,
  tgemFileToNpy,
  tgemFileToSafetensors,
  tgemToNpyBytes,
  tgemToSafetensorsBytes,
} from "./convert.js";
