#!/usr/bin/env node
/** scfplot: render diagnostics CSV files to SVG figures.
 *
 *   scfplot decay   --csv run/diagnostics.csv --out decay.svg [--columns a,b] [--window t0,t1]
 *   scfplot periods --csv run/diagnostics.csv --out periods.svg
 */

import { readFileSync, writeFileSync } from "node:fs";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import { parseDiagnostics } from "./csv.js";
import { DEFAULT_DECAY_COLUMNS, buildDecayFigure } from "./decay.js";
import { buildPeriodsFigure } from "./periods.js";

interface CommonArgs {
  csv: string;
  out: string;
}

function loadCsv(path: string) {
  return parseDiagnostics(readFileSync(path, "utf8"));
}

function parseWindow(spec: string | undefined): [number, number] | undefined {
  if (spec === undefined) return undefined;
  const parts = spec.split(",").map(Number);
  if (parts.length !== 2 || parts.some(Number.isNaN) || parts[0] >= parts[1]) {
    throw new Error(`bad --window '${spec}' (expected t0,t1 with t0 < t1)`);
  }
  return [parts[0], parts[1]];
}

export function main(argv: string[]): number {
  try {
    yargs(argv)
      .scriptName("scfplot")
      .command<CommonArgs & { columns: string; window?: string }>(
        "decay",
        "plot decaying diagnostics on a log axis with fitted rates",
        (y) =>
          y
            .option("csv", { type: "string", demandOption: true })
            .option("out", { type: "string", demandOption: true })
            .option("columns", {
              type: "string",
              default: DEFAULT_DECAY_COLUMNS.join(","),
              describe: "comma-separated diagnostic columns",
            })
            .option("window", {
              type: "string",
              describe: "fit window t0,t1 (default: all records)",
            }),
        (args) => {
          const fig = buildDecayFigure(
            loadCsv(args.csv),
            args.columns.split(",").map((s) => s.trim()),
            parseWindow(args.window),
          );
          writeFileSync(args.out, fig.svg);
          for (const r of fig.results) {
            if (r.fit === null) {
              console.log(`${r.column}: fit unavailable`);
            } else {
              console.log(
                `${r.column}: rate=${r.fit.rate.toExponential(12)} ` +
                  `r2=${r.fit.rSquared.toFixed(8)} used=${r.fit.used}`,
              );
            }
          }
          console.log(`masked non-positive rows: ${fig.masked}`);
          console.log(`wrote ${args.out}`);
        },
      )
      .command<CommonArgs>(
        "periods",
        "plot period drift from initial values",
        (y) =>
          y
            .option("csv", { type: "string", demandOption: true })
            .option("out", { type: "string", demandOption: true }),
        (args) => {
          const fig = buildPeriodsFigure(loadCsv(args.csv));
          writeFileSync(args.out, fig.svg);
          console.log(`max |drift| = ${fig.maxDrift.toExponential(12)}`);
          console.log(`wrote ${args.out}`);
        },
      )
      .demandCommand(1, "specify a subcommand: decay or periods")
      .strict()
      .fail((msg, err) => {
        throw err ?? new Error(msg);
      })
      .parseSync();
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url.endsWith(process.argv[1].split("/").pop() ?? "");
if (invokedDirectly) {
  process.exit(main(hideBin(process.argv)));
}
