/**
 * Parsers for the run-log contracts emitted by the training runner:
 * metrics.csv / metrics.jsonl (one row per evaluation interval) and eval.csv
 * (one row per zero-shot metric).
 */

import Papa from "papaparse";

export interface SchemeLabel {
  ratio: number;
  block: number;
}

export interface MetricsTable {
  configHash: string;
  steps: number[];
  armIndex: number[];
  ratio: number[];
  block: number[];
  rawReward: (number | null)[];
  scaledReward: (number | null)[];
  lossBefore: (number | null)[];
  lossAfter: (number | null)[];
  trainLoss: (number | null)[];
  seed: number[];
  schemes: SchemeLabel[];
  /** probs[t][k]: sampling probability of scheme k at interval t */
  probs: number[][];
}

export interface EvalRow {
  runId: string;
  method: string;
  task: string;
  metric: string;
  mean: number;
  stderr: number;
  n: number;
  seedBase: number;
}

function toNullable(raw: string): number | null {
  const value = Number(raw);
  return Number.isFinite(value) ? value : null;
}

const PROB_COLUMN = /^p_([0-9.]+)_([0-9]+)$/;

export function parseMetricsCsv(text: string): MetricsTable {
  const lines = text.split("\n");
  let configHash = "";
  const bodyLines: string[] = [];
  for (const line of lines) {
    if (line.startsWith("#")) {
      const match = line.match(/config_hash=([0-9a-f]+)/);
      if (match) configHash = match[1];
    } else if (line.trim().length > 0) {
      bodyLines.push(line);
    }
  }
  const parsed = Papa.parse<string[]>(bodyLines.join("\n"), { skipEmptyLines: true });
  const rows = parsed.data;
  if (rows.length < 1) throw new Error("metrics csv has no header row");
  const header = rows[0];
  const index = new Map(header.map((name, i) => [name, i]));
  for (const required of ["step", "arm_index", "ratio", "block"]) {
    if (!index.has(required)) throw new Error(`metrics csv missing column '${required}'`);
  }

  const schemes: SchemeLabel[] = [];
  const probCols: number[] = [];
  header.forEach((name, i) => {
    const match = name.match(PROB_COLUMN);
    if (match) {
      schemes.push({ ratio: Number(match[1]), block: Number(match[2]) });
      probCols.push(i);
    }
  });
  if (schemes.length === 0) throw new Error("metrics csv has no probability columns");

  const table: MetricsTable = {
    configHash,
    steps: [],
    armIndex: [],
    ratio: [],
    block: [],
    rawReward: [],
    scaledReward: [],
    lossBefore: [],
    lossAfter: [],
    trainLoss: [],
    seed: [],
    schemes,
    probs: [],
  };
  const col = (name: string) => index.get(name)!;
  for (const row of rows.slice(1)) {
    table.steps.push(Number(row[col("step")]));
    table.armIndex.push(Number(row[col("arm_index")]));
    table.ratio.push(Number(row[col("ratio")]));
    table.block.push(Number(row[col("block")]));
    table.rawReward.push(toNullable(row[col("raw_reward")]));
    table.scaledReward.push(toNullable(row[col("scaled_reward")]));
    table.lossBefore.push(toNullable(row[col("loss_before")]));
    table.lossAfter.push(toNullable(row[col("loss_after")]));
    table.trainLoss.push(index.has("train_loss") ? toNullable(row[col("train_loss")]) : null);
    table.seed.push(index.has("seed") ? Number(row[col("seed")]) : 0);
    table.probs.push(probCols.map((i) => Number(row[i])));
  }
  return table;
}

interface JsonlHeader {
  type: "header";
  config_hash: string;
  schemes?: SchemeLabel[];
}

interface JsonlRecord {
  type: "record";
  step: number;
  arm_index: number;
  ratio: number;
  block: number;
  raw_reward: number | null;
  scaled_reward: number | null;
  loss_before: number | null;
  loss_after: number | null;
  probs: number[];
  train_loss: number | null;
  seed: number;
}

export function parseMetricsJsonl(text: string): MetricsTable {
  let header: JsonlHeader | null = null;
  const records: JsonlRecord[] = [];
  for (const line of text.split("\n")) {
    if (!line.trim()) continue;
    const obj = JSON.parse(line);
    if (obj.type === "header") header = obj;
    else if (obj.type === "record") records.push(obj);
  }
  if (!header) throw new Error("metrics jsonl has no header line");
  if (!header.schemes) throw new Error("metrics jsonl header lacks scheme labels");
  return {
    configHash: header.config_hash,
    steps: records.map((r) => r.step),
    armIndex: records.map((r) => r.arm_index),
    ratio: records.map((r) => r.ratio),
    block: records.map((r) => r.block),
    rawReward: records.map((r) => r.raw_reward),
    scaledReward: records.map((r) => r.scaled_reward),
    lossBefore: records.map((r) => r.loss_before),
    lossAfter: records.map((r) => r.loss_after),
    trainLoss: records.map((r) => r.train_loss),
    seed: records.map((r) => r.seed),
    schemes: header.schemes,
    probs: records.map((r) => r.probs),
  };
}

export function parseMetricsFile(path: string, text: string): MetricsTable {
  return path.endsWith(".jsonl") ? parseMetricsJsonl(text) : parseMetricsCsv(text);
}

export function parseEvalCsv(text: string): EvalRow[] {
  const lines = text.split("\n").filter((l) => l.trim() && !l.startsWith("#"));
  if (lines.length === 0) return [];
  const parsed = Papa.parse<string[]>(lines.join("\n"), { skipEmptyLines: true });
  const header = parsed.data[0];
  const index = new Map(header.map((name, i) => [name, i]));
  for (const required of ["method", "task", "metric", "mean", "stderr"]) {
    if (!index.has(required)) throw new Error(`eval csv missing column '${required}'`);
  }
  return parsed.data.slice(1).map((row) => ({
    runId: row[index.get("run_id")!] ?? "",
    method: row[index.get("method")!],
    task: row[index.get("task")!],
    metric: row[index.get("metric")!],
    mean: Number(row[index.get("mean")!]),
    stderr: Number(row[index.get("stderr")!]),
    n: Number(row[index.get("n")!] ?? 0),
    seedBase: Number(row[index.get("seed_base")!] ?? 0),
  }));
}
