import { existsSync, mkdtempSync, readFileSync } from "fs";
import { tmpdir } from "os";
import { join } from "path";
import { describe, expect, it } from "vitest";

import { renderFigure } from "../src/figures.js";
import { heatColor, linePlot } from "../src/svg.js";

const SAMPLE = join(__dirname, "..", "testdata", "sample_run");

function renderedSvg(kind: string, input: string, extra: Record<string, unknown> = {}): string {
  const dir = mkdtempSync(join(tmpdir(), "plots-"));
  const out = join(dir, `${kind}.svg`);
  renderFigure({ kind: kind as never, input, out, ...extra });
  expect(existsSync(out)).toBe(true);
  const svg = readFileSync(out, "utf-8");
  expect(svg.startsWith("<svg")).toBe(true);
  expect(svg.trimEnd().endsWith("</svg>")).toBe(true);
  return svg;
}

describe("figure rendering from the recorded sample run", () => {
  it("renders curriculum probability heatmaps", () => {
    const svg = renderedSvg("curriculum-probs", join(SAMPLE, "metrics.csv"));
    expect(svg).toContain("block size");
    expect(svg).toContain("mask ratio");
    expect((svg.match(/<rect/g) ?? []).length).toBeGreaterThan(100);
  });

  it("renders mean-scheme curves from the jsonl mirror", () => {
    const svg = renderedSvg("mean-scheme", join(SAMPLE, "metrics.jsonl"), { smoothing: 2 });
    expect(svg).toContain("mean block size");
    expect(svg).toContain("polyline");
  });

  it("renders eval curves with stderr bands", () => {
    const svg = renderedSvg("eval-curves", join(SAMPLE, "eval.csv"), {
      task: "skill_prompt",
      metric: "reward",
    });
    expect(svg).toContain("polygon"); // the band
    expect(svg).toContain("currmask");
    expect(svg).toContain("replay_oracle");
  });

  it("renders learning curves", () => {
    const svg = renderedSvg("learning-curve", join(SAMPLE, "metrics.csv"));
    expect(svg).toContain("train loss");
    expect(svg).toContain("target loss");
  });
});

describe("svg primitives", () => {
  it("single-point series becomes a marker, not a line", () => {
    const svg = linePlot({
      title: "t",
      xLabel: "x",
      yLabel: "y",
      series: [{ label: "solo", x: [5], y: [2] }],
    });
    expect(svg).toContain("<circle");
    expect(svg).not.toContain("<polyline");
  });

  it("band polygon half-width follows the band values", () => {
    const svg = linePlot({
      title: "t",
      xLabel: "x",
      yLabel: "y",
      series: [{ label: "s", x: [0, 1], y: [0, 0], band: [1, 1] }],
    });
    const polygon = svg.match(/<polygon points="([^"]+)"/);
    expect(polygon).not.toBeNull();
    const ys = polygon![1]
      .split(" ")
      .map((pair) => Number(pair.split(",")[1]));
    // symmetric band: upper edge ys mirror lower edge ys around the center
    const mid = (Math.min(...ys) + Math.max(...ys)) / 2;
    const upper = ys.slice(0, 2);
    const lower = ys.slice(2);
    for (let i = 0; i < 2; i++) {
      expect(Math.abs(upper[i] - mid)).toBeCloseTo(Math.abs(lower[1 - i] - mid), 6);
    }
  });

  it("heat ramp is monotone in brightness endpoints", () => {
    expect(heatColor(0)).toBe("rgb(68,1,84)");
    expect(heatColor(1)).toBe("rgb(253,231,37)");
  });

  it("empty data still renders a placeholder document", () => {
    const svg = linePlot({ title: "t", xLabel: "x", yLabel: "y", series: [] });
    expect(svg).toContain("(no data)");
  });
});
