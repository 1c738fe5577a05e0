/**
 * Minimal dependency-free SVG rendering: line charts with optional stderr
 * bands, and step-by-category heatmaps. Output is a standalone SVG string.
 */

export interface Series {
  label: string;
  x: number[];
  y: number[];
  /** half-width of a shaded band around y, e.g. stderr */
  band?: number[];
  color?: string;
}

export interface LinePlotSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
  width?: number;
  height?: number;
}

export interface HeatmapSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  x: number[];
  yLabels: (string | number)[];
  /** z[row][col] with row indexing yLabels and col indexing x */
  z: number[][];
  width?: number;
  height?: number;
}

const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"];
const MARGIN = { top: 34, right: 16, bottom: 42, left: 56 };

function linearScale(domain: [number, number], range: [number, number]) {
  let [d0, d1] = domain;
  if (d0 === d1) {
    d0 -= 0.5;
    d1 += 0.5;
  }
  const k = (range[1] - range[0]) / (d1 - d0);
  return (v: number) => range[0] + (v - d0) * k;
}

function ticks(lo: number, hi: number, count = 5): number[] {
  if (lo === hi) return [lo];
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / count)));
  const candidates = [step, 2 * step, 5 * step, 10 * step];
  const chosen = candidates.find((c) => span / c <= count) ?? 10 * step;
  const out: number[] = [];
  for (let v = Math.ceil(lo / chosen) * chosen; v <= hi + 1e-12; v += chosen) {
    out.push(Number(v.toPrecision(10)));
  }
  return out;
}

function fmt(v: number): string {
  if (Math.abs(v) >= 1000) return v.toExponential(1);
  return Number(v.toPrecision(4)).toString();
}

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

/** viridis-like ramp from dark blue (0) to yellow (1) */
export function heatColor(v: number): string {
  const t = Math.max(0, Math.min(1, v));
  const stops = [
    [68, 1, 84],
    [59, 82, 139],
    [33, 145, 140],
    [94, 201, 98],
    [253, 231, 37],
  ];
  const pos = t * (stops.length - 1);
  const i = Math.min(stops.length - 2, Math.floor(pos));
  const f = pos - i;
  const mix = stops[i].map((c, ch) => Math.round(c + f * (stops[i + 1][ch] - c)));
  return `rgb(${mix[0]},${mix[1]},${mix[2]})`;
}

function frame(width: number, height: number, title: string, xLabel: string, yLabel: string,
               body: string): string {
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}" font-family="sans-serif" font-size="11">\n` +
    `<rect width="${width}" height="${height}" fill="white"/>\n` +
    `<text x="${width / 2}" y="18" text-anchor="middle" font-size="13">${esc(title)}</text>\n` +
    `<text x="${width / 2}" y="${height - 8}" text-anchor="middle">${esc(xLabel)}</text>\n` +
    `<text x="14" y="${height / 2}" text-anchor="middle" ` +
    `transform="rotate(-90 14 ${height / 2})">${esc(yLabel)}</text>\n` +
    body +
    `</svg>\n`
  );
}

export function linePlot(spec: LinePlotSpec): string {
  const width = spec.width ?? 560;
  const height = spec.height ?? 340;
  const plotW = width - MARGIN.left - MARGIN.right;
  const plotH = height - MARGIN.top - MARGIN.bottom;

  const xs = spec.series.flatMap((s) => s.x);
  const ys = spec.series.flatMap((s, i) =>
    s.y.flatMap((v, j) => {
      const b = s.band?.[j] ?? 0;
      return [v - b, v + b];
    })
  );
  if (xs.length === 0) {
    return frame(width, height, spec.title, spec.xLabel, spec.yLabel,
      `<text x="${width / 2}" y="${height / 2}" text-anchor="middle">(no data)</text>`);
  }
  const sx = linearScale([Math.min(...xs), Math.max(...xs)], [MARGIN.left, MARGIN.left + plotW]);
  const sy = linearScale([Math.min(...ys), Math.max(...ys)], [MARGIN.top + plotH, MARGIN.top]);

  let body = `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${plotW}" height="${plotH}" ` +
    `fill="none" stroke="#999"/>\n`;
  for (const t of ticks(Math.min(...xs), Math.max(...xs))) {
    const px = sx(t);
    body += `<line x1="${px}" y1="${MARGIN.top + plotH}" x2="${px}" y2="${MARGIN.top + plotH + 4}" stroke="#333"/>`;
    body += `<text x="${px}" y="${MARGIN.top + plotH + 16}" text-anchor="middle">${fmt(t)}</text>\n`;
  }
  for (const t of ticks(Math.min(...ys), Math.max(...ys))) {
    const py = sy(t);
    body += `<line x1="${MARGIN.left - 4}" y1="${py}" x2="${MARGIN.left}" y2="${py}" stroke="#333"/>`;
    body += `<text x="${MARGIN.left - 7}" y="${py + 3}" text-anchor="end">${fmt(t)}</text>\n`;
  }

  spec.series.forEach((series, i) => {
    const color = series.color ?? PALETTE[i % PALETTE.length];
    if (series.band && series.x.length > 1) {
      const upper = series.x.map((x, j) => `${sx(x)},${sy(series.y[j] + (series.band![j] ?? 0))}`);
      const lower = [...series.x.keys()]
        .reverse()
        .map((j) => `${sx(series.x[j])},${sy(series.y[j] - (series.band![j] ?? 0))}`);
      body += `<polygon points="${[...upper, ...lower].join(" ")}" fill="${color}" opacity="0.18"/>\n`;
    }
    if (series.x.length === 1) {
      body += `<circle cx="${sx(series.x[0])}" cy="${sy(series.y[0])}" r="3.5" fill="${color}"/>\n`;
    } else {
      const points = series.x.map((x, j) => `${sx(x)},${sy(series.y[j])}`).join(" ");
      body += `<polyline points="${points}" fill="none" stroke="${color}" stroke-width="1.6"/>\n`;
    }
    const ly = MARGIN.top + 14 * i + 4;
    body += `<rect x="${width - MARGIN.right - 110}" y="${ly - 8}" width="10" height="10" fill="${color}"/>`;
    body += `<text x="${width - MARGIN.right - 96}" y="${ly + 1}">${esc(series.label)}</text>\n`;
  });

  return frame(width, height, spec.title, spec.xLabel, spec.yLabel, body);
}

export function heatmap(spec: HeatmapSpec): string {
  const width = spec.width ?? 560;
  const height = spec.height ?? 340;
  const plotW = width - MARGIN.left - MARGIN.right - 40; // room for colorbar
  const plotH = height - MARGIN.top - MARGIN.bottom;
  const rows = spec.yLabels.length;
  const cols = spec.x.length;
  if (rows === 0 || cols === 0) {
    return frame(width, height, spec.title, spec.xLabel, spec.yLabel,
      `<text x="${width / 2}" y="${height / 2}" text-anchor="middle">(no data)</text>`);
  }
  const flat = spec.z.flat();
  const zMin = Math.min(...flat);
  const zMax = Math.max(...flat);
  const norm = (v: number) => (zMax === zMin ? 0.5 : (v - zMin) / (zMax - zMin));

  const cellW = plotW / cols;
  const cellH = plotH / rows;
  let body = "";
  for (let r = 0; r < rows; r++) {
    for (let c = 0; c < cols; c++) {
      const x = MARGIN.left + c * cellW;
      const y = MARGIN.top + (rows - 1 - r) * cellH; // low categories at the bottom
      body += `<rect x="${x.toFixed(2)}" y="${y.toFixed(2)}" width="${(cellW + 0.5).toFixed(2)}" ` +
        `height="${(cellH + 0.5).toFixed(2)}" fill="${heatColor(norm(spec.z[r][c]))}"/>\n`;
    }
  }
  const yTickEvery = Math.max(1, Math.ceil(rows / 10));
  for (let r = 0; r < rows; r += yTickEvery) {
    const y = MARGIN.top + (rows - 1 - r) * cellH + cellH / 2;
    body += `<text x="${MARGIN.left - 6}" y="${y + 3}" text-anchor="end">${spec.yLabels[r]}</text>\n`;
  }
  const xTickEvery = Math.max(1, Math.ceil(cols / 6));
  for (let c = 0; c < cols; c += xTickEvery) {
    const x = MARGIN.left + c * cellW + cellW / 2;
    body += `<text x="${x}" y="${MARGIN.top + plotH + 16}" text-anchor="middle">${fmt(spec.x[c])}</text>\n`;
  }
  // colorbar
  const barX = width - MARGIN.right - 26;
  for (let i = 0; i < 40; i++) {
    const y = MARGIN.top + plotH - ((i + 1) / 40) * plotH;
    body += `<rect x="${barX}" y="${y.toFixed(2)}" width="12" height="${(plotH / 40 + 0.5).toFixed(2)}" ` +
      `fill="${heatColor(i / 39)}"/>\n`;
  }
  body += `<text x="${barX + 16}" y="${MARGIN.top + plotH}" font-size="9">${fmt(zMin)}</text>\n`;
  body += `<text x="${barX + 16}" y="${MARGIN.top + 8}" font-size="9">${fmt(zMax)}</text>\n`;
  return frame(width, height, spec.title, spec.xLabel, spec.yLabel, body);
}

/** Stack several standalone SVGs vertically into one document. */
export function stack(svgs: string[], width = 560): string {
  const heights = svgs.map((s) => {
    const match = s.match(/height="(\d+)"/);
    return match ? Number(match[1]) : 340;
  });
  const total = heights.reduce((a, b) => a + b, 0);
  let offset = 0;
  let body = "";
  svgs.forEach((svg, i) => {
    const inner = svg.replace(/^<svg[^>]*>/, "").replace(/<\/svg>\s*$/, "");
    body += `<g transform="translate(0 ${offset})">${inner}</g>\n`;
    offset += heights[i];
  });
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${total}" ` +
    `viewBox="0 0 ${width} ${total}" font-family="sans-serif" font-size="11">\n` +
    body +
    `</svg>\n`
  );
}
