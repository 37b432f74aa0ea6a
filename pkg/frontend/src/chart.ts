// Inline SVG line chart over the secondary table: one polyline per value
// of the grouping metadata column, one circle per row.

import type { Cell, SecondaryPayload } from "./types.js";
import type { ChartSelection } from "./state.js";

export interface Series {
  label: string;
  points: Array<[number, number]>;
}

function asNumber(cell: Cell | undefined): number | null {
  if (typeof cell === "number") return Number.isFinite(cell) ? cell : null;
  if (typeof cell === "boolean") return cell ? 1 : 0;
  if (cell === undefined) return null;
  const value = Number(cell);
  return Number.isFinite(value) ? value : null;
}

export function seriesFor(table: SecondaryPayload, sel: ChartSelection): Series[] {
  const xi = table.columns.indexOf(sel.x);
  const yi = table.columns.indexOf(sel.y);
  const gi = table.columns.indexOf(sel.group);
  if (xi < 0 || yi < 0 || gi < 0) return [];
  const byGroup = new Map<string, Array<[number, number]>>();
  for (const row of table.rows) {
    const x = asNumber(row[xi]);
    const y = asNumber(row[yi]);
    if (x === null || y === null) continue;
    const key = String(row[gi]);
    let points = byGroup.get(key);
    if (points === undefined) {
      points = [];
      byGroup.set(key, points);
    }
    points.push([x, y]);
  }
  return [...byGroup.entries()].map(([value, points]) => ({
    label: `${sel.group}=${value}`,
    points,
  }));
}

const PALETTE = ["#2563eb", "#dc2626", "#059669", "#d97706", "#7c3aed", "#0891b2"];

const WIDTH = 640;
const HEIGHT = 360;
const PAD = 46;

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function chartSvg(series: Series[], xLabel: string, yLabel: string): string {
  const all = series.flatMap((s) => s.points);
  if (all.length === 0) {
    return `<svg viewBox="0 0 ${WIDTH} ${HEIGHT}" class="chart"><text x="20" y="30">no plottable rows</text></svg>`;
  }
  const xs = all.map((p) => p[0]);
  const ys = all.map((p) => p[1]);
  let [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  if (x0 === x1) [x0, x1] = [x0 - 1, x1 + 1];
  if (y0 === y1) [y0, y1] = [y0 - 1, y1 + 1];
  const sx = (x: number) => PAD + ((x - x0) / (x1 - x0)) * (WIDTH - 2 * PAD);
  const sy = (y: number) => HEIGHT - PAD - ((y - y0) / (y1 - y0)) * (HEIGHT - 2 * PAD);

  const parts: string[] = [
    `<svg viewBox="0 0 ${WIDTH} ${HEIGHT}" class="chart" role="img">`,
    `<rect x="${PAD}" y="${PAD}" width="${WIDTH - 2 * PAD}" height="${HEIGHT - 2 * PAD}" class="chart-frame"/>`,
  ];
  series.forEach((s, index) => {
    const color = PALETTE[index % PALETTE.length];
    const coords = s.points
      .map(([x, y]) => `${sx(x).toFixed(2)},${sy(y).toFixed(2)}`)
      .join(" ");
    parts.push(
      `<polyline fill="none" stroke="${color}" stroke-width="2" points="${coords}"/>`,
    );
    for (const [x, y] of s.points) {
      parts.push(
        `<circle cx="${sx(x).toFixed(2)}" cy="${sy(y).toFixed(2)}" r="3.5" fill="${color}"/>`,
      );
    }
    parts.push(
      `<text x="${WIDTH - PAD}" y="${PAD + 16 * (index + 1)}" text-anchor="end" fill="${color}" class="legend">${esc(s.label)}</text>`,
    );
  });
  parts.push(
    `<text x="${WIDTH / 2}" y="${HEIGHT - 10}" text-anchor="middle" class="axis">${esc(xLabel)}</text>`,
    `<text x="14" y="${HEIGHT / 2}" text-anchor="middle" transform="rotate(-90 14 ${HEIGHT / 2})" class="axis">${esc(yLabel)}</text>`,
    `</svg>`,
  );
  return parts.join("");
}
