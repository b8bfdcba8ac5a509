export type { Graph } from "./binary.js";
export { parseGraph } from "./binary.js";
export type {
  Algorithm,
  GenerateOptions,
  GenerateResult,
  Metric,
  RunStats,
} from "./client.js";
export { cliArgs, generate } from "./client.js";
