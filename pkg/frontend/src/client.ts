/** Client that drives the generator's command line interface.
 *
 * Graphs are requested in the binary format on standard output with
 * run statistics as a single JSON object on standard error, then
 * decoded into typed arrays.  Nothing here reaches into the Python
 * package's internals; the subprocess boundary is the whole contract.
 */
import { spawn } from "node:child_process";

import type { Graph } from "./binary.js";
import { parseGraph } from "./binary.js";

export type Metric = "l2" | "l1" | "l0" | "linf";
export type Algorithm = "naive" | "qjump" | "bucket";

export interface GenerateOptions {
  nodes: number;
  model?: string;
  q?: number;
  s?: number;
  r?: number;
  theta1?: number;
  theta2?: number;
  metric?: Metric;
  /** Region spec: "rect:W,H", "ellipse:A,B" or "polygon:PATH". */
  region?: string;
  buckets?: number;
  algorithm?: Algorithm;
  threads?: number;
  seed?: number;
  distances?: boolean;
  /** Interpreter used to run the generator module. */
  python?: string;
  timeoutMs?: number;
}

export interface RunStats {
  n: number;
  e: number;
  algorithm: string;
  seed: number;
  workers: number;
  mean_degree: number;
  total_seconds: number;
  [key: string]: unknown;
}

export interface GenerateResult {
  graph: Graph;
  stats: RunStats;
}

export function cliArgs(opts: GenerateOptions): string[] {
  const args = ["-m", "sern", "--nodes", String(opts.nodes)];
  const scalar: Array<[string, number | string | undefined]> = [
    ["--model", opts.model],
    ["--q", opts.q],
    ["--s", opts.s],
    ["--r", opts.r],
    ["--theta1", opts.theta1],
    ["--theta2", opts.theta2],
    ["--metric", opts.metric],
    ["--region", opts.region],
    ["--buckets", opts.buckets],
    ["--algorithm", opts.algorithm],
    ["--threads", opts.threads],
    ["--seed", opts.seed],
  ];
  for (const [flag, value] of scalar) {
    if (value !== undefined) {
      args.push(flag, String(value));
    }
  }
  if (opts.distances) {
    args.push("--distances");
  }
  args.push("--format", "binary", "--output", "-", "--json");
  return args;
}

export function generate(opts: GenerateOptions): Promise<GenerateResult> {
  const python = opts.python ?? "python3";
  return new Promise((resolve, reject) => {
    const child = spawn(python, cliArgs(opts), {
      stdio: ["ignore", "pipe", "pipe"],
      timeout: opts.timeoutMs ?? 600_000,
    });
    const out: Buffer[] = [];
    const err: Buffer[] = [];
    child.stdout.on("data", (chunk: Buffer) => out.push(chunk));
    child.stderr.on("data", (chunk: Buffer) => err.push(chunk));
    child.on("error", reject);
    child.on("close", (code) => {
      const stderr = Buffer.concat(err).toString("utf8");
      if (code !== 0) {
        reject(new Error(`generator exited with code ${code}: ${stderr.trim()}`));
        return;
      }
      try {
        const graph = parseGraph(Buffer.concat(out));
        const stats = JSON.parse(stderr) as RunStats;
        resolve({ graph, stats });
      } catch (exc) {
        reject(exc as Error);
      }
    });
  });
}
