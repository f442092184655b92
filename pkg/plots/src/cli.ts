#!/usr/bin/env node
/**
 * Render log-log convergence figures from a solver convergence CSV.
 *
 *   surfns-plots <convergence.csv> [--cols e_u_ah,e_p_l2l2] [--slopes 1,2,3] [-o fig.svg]
 *
 * One curve per selected error column against the mesh size column `h`;
 * dashed reference-slope guides are anchored at the coarsest datum.
 */

import { readFileSync, writeFileSync } from "node:fs";

import { parseCsv } from "./csv.js";
import { PlotSpec, extractSeries, renderSvg } from "./plot.js";

const DEFAULT_COLS = ["e_u_ah", "e_u_linf_l2", "e_n_linf_l2", "e_p_l2l2"];

export interface CliOptions {
  input: string;
  cols: string[];
  slopes: number[];
  output: string;
  title?: string;
}

export function parseArgs(argv: string[]): CliOptions {
  const args = [...argv];
  const opts: CliOptions = { input: "", cols: DEFAULT_COLS, slopes: [1, 2, 3], output: "convergence.svg" };
  while (args.length > 0) {
    const a = args.shift()!;
    if (a === "--cols") {
      opts.cols = (args.shift() ?? "").split(",").filter((s) => s.length > 0);
    } else if (a === "--slopes") {
      opts.slopes = (args.shift() ?? "").split(",").map(Number);
      if (opts.slopes.some((s) => !(s > 0))) {
        throw new Error("slopes must be positive numbers");
      }
    } else if (a === "-o" || a === "--out") {
      opts.output = args.shift() ?? opts.output;
    } else if (a === "--title") {
      opts.title = args.shift();
    } else if (a.startsWith("-")) {
      throw new Error(`unknown option ${a}`);
    } else if (opts.input === "") {
      opts.input = a;
    } else {
      throw new Error(`unexpected argument ${a}`);
    }
  }
  if (opts.input === "") {
    throw new Error("usage: surfns-plots <convergence.csv> [--cols ...] [--slopes ...] [-o fig.svg]");
  }
  return opts;
}

export function run(opts: CliOptions): { svg: string; warnings: string[] } {
  const warnings: string[] = [];
  const table = parseCsv(readFileSync(opts.input, "utf-8"));
  const series = extractSeries(table, opts.cols);
  if (table.rows.length < 2) {
    warnings.push("single refinement level: plotting points only, no slope guides");
  }
  const spec: PlotSpec = { columns: opts.cols, slopes: opts.slopes, title: opts.title };
  const svg = renderSvg(series, spec);
  writeFileSync(opts.output, svg);
  return { svg, warnings };
}

const invokedDirectly = process.argv[1] !== undefined && import.meta.url.endsWith(process.argv[1].split("/").pop()!);
if (invokedDirectly) {
  try {
    const opts = parseArgs(process.argv.slice(2));
    const { warnings } = run(opts);
    for (const w of warnings) {
      console.warn(`warning: ${w}`);
    }
    console.log(`wrote ${opts.output}`);
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    process.exit(2);
  }
}
