/**
 * Figure assembly: read run logs, apply the transforms, render SVG files.
 */

import { readFileSync, writeFileSync } from "fs";

import { parseEvalCsv, parseMetricsFile } from "./metrics.js";
import {
  blockMarginals,
  evalCurves,
  learningCurves,
  meanScheme,
  ratioMarginals,
  smooth,
} from "./transforms.js";
import { heatmap, linePlot, stack } from "./svg.js";

export type FigureKind = "curriculum-probs" | "mean-scheme" | "eval-curves" | "learning-curve";

export interface PlotSpec {
  kind: FigureKind;
  /** metrics.csv / metrics.jsonl for metrics figures, eval.csv for eval-curves */
  input: string;
  out: string;
  smoothing?: number;
  /** eval-curves: which task/metric family to plot */
  task?: string;
  metric?: string;
}

function smoothColumns(values: number[][], window: number): number[][] {
  if (window <= 1) return values;
  const cols = values[0]?.length ?? 0;
  const smoothed = values.map((row) => [...row]);
  for (let c = 0; c < cols; c++) {
    const column = smooth(values.map((row) => row[c]), window);
    column.forEach((v, t) => {
      smoothed[t][c] = v;
    });
  }
  return smoothed;
}

export function renderCurriculumProbs(input: string, smoothing = 1): string {
  const table = parseMetricsFile(input, readFileSync(input, "utf-8"));
  const byBlock = blockMarginals(table);
  const byRatio = ratioMarginals(table);
  const blockZ = smoothColumns(byBlock.values, smoothing);
  const ratioZ = smoothColumns(byRatio.values, smoothing);
  const transpose = (m: number[][]) =>
    m[0].map((_, c) => m.map((row) => row[c]));
  return stack([
    heatmap({
      title: "curriculum probability by block size",
      xLabel: "training step",
      yLabel: "block size",
      x: byBlock.steps,
      yLabels: byBlock.axis,
      z: transpose(blockZ),
    }),
    heatmap({
      title: "curriculum probability by mask ratio",
      xLabel: "training step",
      yLabel: "mask ratio",
      x: byRatio.steps,
      yLabels: byRatio.axis,
      z: transpose(ratioZ),
    }),
  ]);
}

export function renderMeanScheme(input: string, smoothing = 1): string {
  const table = parseMetricsFile(input, readFileSync(input, "utf-8"));
  const series = meanScheme(table);
  return stack([
    linePlot({
      title: "mean block size under the curriculum",
      xLabel: "training step",
      yLabel: "expected block size",
      series: [
        {
          label: "mean block",
          x: series.steps,
          y: smooth(series.meanBlock, smoothing),
        },
      ],
    }),
    linePlot({
      title: "mean mask ratio under the curriculum",
      xLabel: "training step",
      yLabel: "expected mask ratio",
      series: [
        {
          label: "mean ratio",
          x: series.steps,
          y: smooth(series.meanRatio, smoothing),
        },
      ],
    }),
  ]);
}

export function renderEvalCurves(input: string, task = "skill_prompt", metric = "reward"): string {
  const rows = parseEvalCsv(readFileSync(input, "utf-8"));
  const curves = evalCurves(rows, task, metric);
  return linePlot({
    title: `${task}: ${metric} vs horizon`,
    xLabel: task === "skill_prompt" ? "rollout length" : "goal timestep",
    yLabel: metric,
    series: curves.map((curve) => ({
      label: curve.method,
      x: curve.points.map((p) => p.x),
      y: curve.points.map((p) => p.mean),
      band: curve.points.map((p) => p.stderr),
    })),
  });
}

export function renderLearningCurve(input: string, smoothing = 1): string {
  const table = parseMetricsFile(input, readFileSync(input, "utf-8"));
  const curve = learningCurves(table);
  const series = [];
  const defined = (values: (number | null)[]) => values.every((v) => v !== null);
  if (defined(curve.trainLoss)) {
    series.push({
      label: "train loss",
      x: curve.steps,
      y: smooth(curve.trainLoss.map((v) => v!), smoothing),
    });
  }
  if (defined(curve.validationLoss)) {
    series.push({
      label: "target loss",
      x: curve.steps,
      y: smooth(curve.validationLoss.map((v) => v!), smoothing),
    });
  }
  return linePlot({
    title: "learning curves",
    xLabel: "training step",
    yLabel: "loss",
    series,
  });
}

export function renderFigure(spec: PlotSpec): void {
  const smoothing = spec.smoothing ?? 1;
  let svg: string;
  switch (spec.kind) {
    case "curriculum-probs":
      svg = renderCurriculumProbs(spec.input, smoothing);
      break;
    case "mean-scheme":
      svg = renderMeanScheme(spec.input, smoothing);
      break;
    case "eval-curves":
      svg = renderEvalCurves(spec.input, spec.task ?? "skill_prompt", spec.metric ?? "reward");
      break;
    case "learning-curve":
      svg = renderLearningCurve(spec.input, smoothing);
      break;
    default:
      throw new Error(`unknown figure kind ${(spec as PlotSpec).kind}`);
  }
  writeFileSync(spec.out, svg, "utf-8");
}
