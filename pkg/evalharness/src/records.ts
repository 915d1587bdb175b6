/**
 * Run-record ingestion. The partitioner CLI appends one JSON object per
 * run (JSON lines); this module validates them and flattens them into
 * result-table rows keyed by (instance, k, seed, algorithm).
 */

import * as fs from "fs";
import * as path from "path";
import { z } from "zod";

export const runRecordSchema = z.object({
  balanced: z.boolean(),
  config: z.record(z.unknown()).default({}),
  epsilon: z.string(),
  imbalance: z.string(),
  instance: z.string(),
  k: z.number().int().positive(),
  metric: z.number().int().nonnegative(),
  partition_hash: z.string().regex(/^[0-9a-f]{16}$/),
  preset: z.string(),
  seed: z.number().int(),
  threads: z.number().int().positive(),
  timings: z.record(z.number()).default({}),
});

export type RunRecord = z.infer<typeof runRecordSchema>;

/** One run, flattened for aggregation. */
export interface Row {
  /** instance name plus k, the unit profiles count over */
  instanceKey: string;
  instance: string;
  k: number;
  seed: number;
  algorithm: string;
  threads: number;
  metric: number;
  balanced: boolean;
  totalTime: number;
  phaseTimes: Record<string, number>;
}

/** preset plus any --set overrides, so variants sort as distinct algorithms */
export function algorithmLabel(rec: RunRecord): string {
  const overrides = (rec.config as { overrides?: unknown }).overrides;
  if (Array.isArray(overrides) && overrides.length > 0) {
    return `${rec.preset}+${overrides.map(String).sort().join(",")}`;
  }
  return rec.preset;
}

export function toRow(rec: RunRecord): Row {
  const totalTime =
    rec.timings.total ??
    Object.entries(rec.timings)
      .filter(([name]) => name !== "total")
      .reduce((acc, [, v]) => acc + v, 0);
  return {
    instanceKey: `${rec.instance}/k=${rec.k}`,
    instance: rec.instance,
    k: rec.k,
    seed: rec.seed,
    algorithm: algorithmLabel(rec),
    threads: rec.threads,
    metric: rec.metric,
    balanced: rec.balanced,
    totalTime,
    phaseTimes: rec.timings,
  };
}

export function parseRecords(text: string, source = "<string>"): RunRecord[] {
  const records: RunRecord[] = [];
  const lines = text.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (line === "") continue;
    let raw: unknown;
    try {
      raw = JSON.parse(line);
    } catch (err) {
      throw new Error(`${source}:${i + 1}: not valid JSON: ${err}`);
    }
    const parsed = runRecordSchema.safeParse(raw);
    if (!parsed.success) {
      const issue = parsed.error.issues[0];
      throw new Error(
        `${source}:${i + 1}: bad record at .${issue.path.join(".")}: ${issue.message}`,
      );
    }
    records.push(parsed.data);
  }
  return records;
}

/** Read every *.jsonl in `dir` (non-recursive) into rows. */
export function loadResultsDir(dir: string): Row[] {
  const files = fs
    .readdirSync(dir)
    .filter((name) => name.endsWith(".jsonl"))
    .sort();
  if (files.length === 0) {
    throw new Error(`no .jsonl files in ${dir}`);
  }
  const rows: Row[] = [];
  for (const name of files) {
    const full = path.join(dir, name);
    for (const rec of parseRecords(fs.readFileSync(full, "utf-8"), full)) {
      rows.push(toRow(rec));
    }
  }
  return rows;
}
