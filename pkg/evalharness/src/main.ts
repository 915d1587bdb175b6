#!/usr/bin/env node
/**
 * Batch entry point: read every .jsonl run-record file in a results
 * directory, then write performance profiles, a geometric-mean summary
 * table, and self-relative speedup curves (SVG plus a CSV next to
 * every plot) into an output directory.
 */

import * as fs from "fs";
import * as path from "path";
import yargs from "yargs";

import { aggregateSeeds, summarize } from "./aggregate";
import { CsvValue, toCsv } from "./csv";
import { performanceProfile, PerformanceProfile } from "./profile";
import { loadResultsDir } from "./records";
import { selfRelativeSpeedups, speedupCurves } from "./speedup";
import { linePlot, Series } from "./svg";

interface Args {
  results: string;
  out: string;
  window: number;
  timeLimit?: number;
  threads?: number;
}

function profileSeries(profile: PerformanceProfile): Series[] {
  return profile.curves.map((curve) => ({
    label: curve.algorithm,
    xs: curve.points.map((p) => p.tau),
    ys: curve.points.map((p) => p.fraction),
    step: true,
  }));
}

function writeProfile(
  outDir: string,
  name: string,
  title: string,
  profile: PerformanceProfile,
): string[] {
  const written: string[] = [];
  const notes = profile.curves
    .filter((c) => c.failed.length > 0)
    .map((c) => `x ${c.algorithm}: ${c.failed.length} failed`);
  const svgPath = path.join(outDir, `${name}.svg`);
  fs.writeFileSync(
    svgPath,
    linePlot(profileSeries(profile), {
      title,
      xLabel: "ratio to best (tau)",
      yLabel: "fraction of instances",
      yMin: 0,
      yMax: 1,
      notes,
    }),
  );
  written.push(svgPath);

  const rows: CsvValue[][] = [];
  for (const curve of profile.curves) {
    for (const point of curve.points) {
      rows.push([curve.algorithm, point.tau, point.fraction]);
    }
    for (const inst of curve.failed) {
      rows.push([curve.algorithm, "x", inst]);
    }
  }
  const csvPath = path.join(outDir, `${name}.csv`);
  fs.writeFileSync(csvPath, toCsv(["algorithm", "tau", "fraction"], rows));
  written.push(csvPath);
  return written;
}

function run(args: Args): number {
  const rows = loadResultsDir(args.results);
  fs.mkdirSync(args.out, { recursive: true });
  const written: string[] = [];

  // quality and time profiles over the single-thread (or chosen) runs
  const threadCounts = new Set(rows.map((r) => r.threads));
  if (args.threads === undefined && threadCounts.size > 1) {
    console.warn(
      `warning: records mix thread counts {${[...threadCounts]
        .sort((a, b) => a - b)
        .join(",")}}; time profiles average across them ` +
        "(pass --threads to pin one)",
    );
  }
  const aggregates = aggregateSeeds(rows, {
    timeLimitS: args.timeLimit,
    threads: args.threads,
  });
  if (aggregates.length === 0) {
    throw new Error("no rows left after filtering");
  }
  written.push(
    ...writeProfile(
      args.out,
      "profile_quality",
      "Connectivity metric profile",
      performanceProfile(aggregates, { column: "quality" }),
    ),
  );
  written.push(
    ...writeProfile(
      args.out,
      "profile_time",
      "Running time profile",
      performanceProfile(aggregates, { column: "time" }),
    ),
  );

  const summary = summarize(aggregates);
  const summaryPath = path.join(args.out, "summary.csv");
  fs.writeFileSync(
    summaryPath,
    toCsv(
      ["algorithm", "instances", "failures", "gmean_quality", "gmean_time"],
      summary.map((s) => [
        s.algorithm,
        s.instances,
        s.failures,
        s.gmeanQuality,
        s.gmeanTime,
      ]),
    ),
  );
  written.push(summaryPath);

  // speedups come from the unfiltered rows: they need every thread count
  const { points, warnings } = selfRelativeSpeedups(rows);
  for (const warning of warnings) {
    console.warn(`warning: ${warning}`);
  }
  if (points.length > 0) {
    const curves = speedupCurves(points, args.window);
    const series: Series[] = [];
    for (const curve of curves) {
      series.push({
        label: `${curve.threads} threads`,
        xs: curve.speedups.map((_, i) => i + 1),
        ys: curve.speedups,
        dashed: true,
      });
      series.push({
        label: `rolling gmean (${curve.threads}t)`,
        xs: curve.rolling.map((_, i) => i + 1),
        ys: curve.rolling,
      });
    }
    const svgPath = path.join(args.out, "speedup.svg");
    fs.writeFileSync(
      svgPath,
      linePlot(series, {
        title: `Self-relative speedup (window ${args.window})`,
        xLabel: "instances by single-thread time",
        yLabel: "speedup",
        yMin: 0,
      }),
    );
    written.push(svgPath);
    const rows2: CsvValue[][] = [];
    for (const curve of curves) {
      curve.instances.forEach((inst, i) => {
        rows2.push([
          curve.threads,
          i + 1,
          inst,
          curve.speedups[i],
          curve.rolling[i],
        ]);
      });
    }
    const csvPath = path.join(args.out, "speedup.csv");
    fs.writeFileSync(
      csvPath,
      toCsv(["threads", "index", "instance", "speedup", "rolling_gmean"], rows2),
    );
    written.push(csvPath);
  }

  for (const s of summary) {
    console.log(
      `${s.algorithm}: ${s.instances} instances, ${s.failures} failed, ` +
        `gmean metric ${s.gmeanQuality.toPrecision(6)}, ` +
        `gmean time ${s.gmeanTime.toPrecision(4)}s`,
    );
  }
  for (const file of written) {
    console.log(`wrote ${file}`);
  }
  return 0;
}

export function main(argv: string[]): number {
  const args = yargs(argv)
    .usage("$0 <results-dir>", "summarize detpart run records", (y) =>
      y.positional("results-dir", {
        describe: "directory containing .jsonl run-record files",
        type: "string",
        demandOption: true,
      }),
    )
    .option("out", {
      type: "string",
      describe: "output directory for plots and CSVs",
      default: "report",
    })
    .option("window", {
      type: "number",
      describe: "rolling window size for speedup curves",
      default: 15,
    })
    .option("time-limit", {
      type: "number",
      describe: "clamp per-run times to this many seconds",
    })
    .option("threads", {
      type: "number",
      describe: "restrict profiles to runs with this thread count",
    })
    .strict()
    .parseSync();

  return run({
    results: String((args as Record<string, unknown>)["results-dir"]),
    out: args.out,
    window: args.window,
    timeLimit: args["time-limit"],
    threads: args.threads,
  });
}

if (require.main === module) {
  try {
    process.exitCode = main(process.argv.slice(2));
  } catch (err) {
    console.error(`evalharness: ${err instanceof Error ? err.message : err}`);
    process.exitCode = 1;
  }
}
