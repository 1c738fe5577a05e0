#!/usr/bin/env node
/**
 * Figure generation from run logs. Long-form flags only.
 *
 *   currmask-plots --kind curriculum-probs --input runs/x/metrics.csv --out probs.svg
 *   currmask-plots --kind mean-scheme     --input runs/x/metrics.jsonl --out mean.svg --smooth 5
 *   currmask-plots --kind eval-curves     --input runs/x/eval.csv --task skill_prompt --metric reward --out curves.svg
 *   currmask-plots --kind learning-curve  --input runs/x/metrics.csv --out loss.svg
 */

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { FigureKind, renderFigure } from "./figures.js";

const argv = yargs(hideBin(process.argv))
  .usage("$0 --kind <figure> --input <file> --out <svg>")
  .option("kind", {
    type: "string",
    choices: ["curriculum-probs", "mean-scheme", "eval-curves", "learning-curve"] as const,
    demandOption: true,
    describe: "which figure to render",
  })
  .option("input", {
    type: "string",
    demandOption: true,
    describe: "metrics.csv / metrics.jsonl, or eval.csv for eval-curves",
  })
  .option("out", { type: "string", demandOption: true, describe: "output SVG path" })
  .option("smooth", { type: "number", default: 1, describe: "moving-average window" })
  .option("task", { type: "string", default: "skill_prompt", describe: "eval-curves task" })
  .option("metric", { type: "string", default: "reward", describe: "eval-curves metric family" })
  .strict()
  .parseSync();

try {
  renderFigure({
    kind: argv.kind as FigureKind,
    input: argv.input,
    out: argv.out,
    smoothing: argv.smooth,
    task: argv.task,
    metric: argv.metric,
  });
  console.log(`wrote ${argv.out}`);
} catch (err) {
  console.error(`error: ${(err as Error).message}`);
  process.exit(1);
}
