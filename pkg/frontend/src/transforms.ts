/**
 * Data transforms behind every figure, kept separate from rendering so tests
 * can assert on the numbers without touching SVG.
 */

import { EvalRow, MetricsTable } from "./metrics.js";

export interface MarginalSeries {
  /** axis values, e.g. distinct block sizes in ascending order */
  axis: number[];
  steps: number[];
  /** values[t][i]: total probability mass on axis[i] at interval t */
  values: number[][];
}

function marginalize(table: MetricsTable, key: (s: { ratio: number; block: number }) => number): MarginalSeries {
  const axis = [...new Set(table.schemes.map(key))].sort((a, b) => a - b);
  const slot = new Map(axis.map((v, i) => [v, i]));
  const values = table.probs.map((row) => {
    const out = new Array<number>(axis.length).fill(0);
    row.forEach((p, k) => {
      out[slot.get(key(table.schemes[k]))!] += p;
    });
    return out;
  });
  return { axis, steps: table.steps, values };
}

export function blockMarginals(table: MetricsTable): MarginalSeries {
  return marginalize(table, (s) => s.block);
}

export function ratioMarginals(table: MetricsTable): MarginalSeries {
  return marginalize(table, (s) => s.ratio);
}

export interface MeanSchemeSeries {
  steps: number[];
  meanBlock: number[];
  meanRatio: number[];
}

export function meanScheme(table: MetricsTable): MeanSchemeSeries {
  const meanBlock = table.probs.map((row) =>
    row.reduce((acc, p, k) => acc + p * table.schemes[k].block, 0)
  );
  const meanRatio = table.probs.map((row) =>
    row.reduce((acc, p, k) => acc + p * table.schemes[k].ratio, 0)
  );
  return { steps: table.steps, meanBlock, meanRatio };
}

/** Trailing moving average over the last `window` points (window >= 1). */
export function smooth(values: number[], window: number): number[] {
  if (window < 1) throw new Error(`smoothing window must be >= 1, got ${window}`);
  if (window === 1) return [...values];
  const out: number[] = [];
  let acc = 0;
  for (let i = 0; i < values.length; i++) {
    acc += values[i];
    if (i >= window) acc -= values[i - window];
    out.push(acc / Math.min(i + 1, window));
  }
  return out;
}

export interface CurvePoint {
  x: number;
  mean: number;
  stderr: number;
}

export interface MethodCurve {
  method: string;
  points: CurvePoint[];
}

/**
 * Eval rows like metric "reward@30" become per-method curves of mean vs the
 * numeric suffix (rollout length or goal step). Rows sharing (method, x) are
 * averaged; their spread over runs becomes the band when several runs exist.
 */
export function evalCurves(rows: EvalRow[], task: string, metricPrefix: string): MethodCurve[] {
  const suffix = new RegExp(`^${metricPrefix}@(\\d+)$`);
  const byMethod = new Map<string, Map<number, EvalRow[]>>();
  for (const row of rows) {
    if (row.task !== task) continue;
    const match = row.metric.match(suffix);
    if (!match) continue;
    const x = Number(match[1]);
    if (!byMethod.has(row.method)) byMethod.set(row.method, new Map());
    const slot = byMethod.get(row.method)!;
    if (!slot.has(x)) slot.set(x, []);
    slot.get(x)!.push(row);
  }
  const curves: MethodCurve[] = [];
  for (const [method, xs] of byMethod) {
    const points = [...xs.entries()]
      .sort((a, b) => a[0] - b[0])
      .map(([x, group]) => {
        const means = group.map((g) => g.mean);
        const mean = means.reduce((a, b) => a + b, 0) / means.length;
        let stderr: number;
        if (means.length > 1) {
          const variance =
            means.reduce((a, b) => a + (b - mean) ** 2, 0) / (means.length - 1);
          stderr = Math.sqrt(variance / means.length);
        } else {
          stderr = group[0].stderr;
        }
        return { x, mean, stderr };
      });
    curves.push({ method, points });
  }
  return curves.sort((a, b) => a.method.localeCompare(b.method));
}

export interface LearningCurve {
  steps: number[];
  trainLoss: (number | null)[];
  validationLoss: (number | null)[];
}

export function learningCurves(table: MetricsTable): LearningCurve {
  return {
    steps: table.steps,
    trainLoss: table.trainLoss,
    validationLoss: table.lossAfter,
  };
}
