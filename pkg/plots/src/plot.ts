/** Log-log convergence figure rendered as a standalone SVG. */

import { Table, numericColumn } from "./csv.js";

export interface PlotSpec {
  columns: string[];
  slopes: number[];
  title?: string;
  width?: number;
  height?: number;
}

export interface Series {
  name: string;
  h: number[];
  e: number[];
}

const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"];
const MARKERS = ["circle", "square", "diamond", "triangle"] as const;

export function extractSeries(table: Table, columns: string[]): Series[] {
  const h = numericColumn(table, "h");
  return columns.map((name) => ({ name, h, e: numericColumn(table, name) }));
}

function niceTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  for (let p = Math.floor(Math.log10(lo)); p <= Math.ceil(Math.log10(hi)); p++) {
    ticks.push(10 ** p);
  }
  return ticks;
}

function fmtPow10(v: number): string {
  const p = Math.round(Math.log10(v));
  return `1e${p}`;
}

function marker(kind: (typeof MARKERS)[number], x: number, y: number, color: string): string {
  const s = 3.5;
  switch (kind) {
    case "circle":
      return `<circle cx="${x.toFixed(2)}" cy="${y.toFixed(2)}" r="${s}" fill="${color}"/>`;
    case "square":
      return `<rect x="${(x - s).toFixed(2)}" y="${(y - s).toFixed(2)}" width="${2 * s}" height="${2 * s}" fill="${color}"/>`;
    case "diamond":
      return `<path d="M ${x} ${y - s} L ${x + s} ${y} L ${x} ${y + s} L ${x - s} ${y} Z" fill="${color}"/>`;
    case "triangle":
      return `<path d="M ${x} ${y - s} L ${x + s} ${y + s} L ${x - s} ${y + s} Z" fill="${color}"/>`;
  }
}

/** Render series plus dashed reference-slope guides anchored at the coarsest datum. */
export function renderSvg(series: Series[], spec: PlotSpec): string {
  if (series.length === 0) {
    throw new Error("nothing to plot");
  }
  const W = spec.width ?? 640;
  const H = spec.height ?? 480;
  const m = { l: 64, r: 150, t: 36, b: 48 };
  const hsAll = series.flatMap((s) => s.h);
  const esAll = series.flatMap((s) => s.e).filter((e) => e > 0);
  const singleLevel = new Set(hsAll).size < 2;

  const xlo = Math.min(...hsAll) / 1.3;
  const xhi = Math.max(...hsAll) * 1.3;
  let ylo = Math.min(...esAll);
  let yhi = Math.max(...esAll);
  // widen to cover the slope guides
  for (const p of spec.slopes) {
    const drop = (Math.min(...hsAll) / Math.max(...hsAll)) ** p;
    ylo = Math.min(ylo, yhi * drop);
  }
  ylo /= 1.5;
  yhi *= 1.5;

  const X = (h: number) => m.l + ((Math.log(h) - Math.log(xlo)) / (Math.log(xhi) - Math.log(xlo))) * (W - m.l - m.r);
  const Y = (e: number) => H - m.b - ((Math.log(e) - Math.log(ylo)) / (Math.log(yhi) - Math.log(ylo))) * (H - m.t - m.b);

  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" viewBox="0 0 ${W} ${H}">`,
    `<rect width="${W}" height="${H}" fill="white"/>`,
    `<rect x="${m.l}" y="${m.t}" width="${W - m.l - m.r}" height="${H - m.t - m.b}" fill="none" stroke="#444"/>`,
  ];

  for (const t of niceTicks(xlo, xhi)) {
    if (t < xlo || t > xhi) continue;
    parts.push(`<line x1="${X(t)}" y1="${H - m.b}" x2="${X(t)}" y2="${H - m.b + 5}" stroke="#444"/>`);
    parts.push(`<text x="${X(t)}" y="${H - m.b + 18}" font-size="11" text-anchor="middle">${fmtPow10(t)}</text>`);
  }
  for (const t of niceTicks(ylo, yhi)) {
    if (t < ylo || t > yhi) continue;
    parts.push(`<line x1="${m.l - 5}" y1="${Y(t)}" x2="${m.l}" y2="${Y(t)}" stroke="#444"/>`);
    parts.push(`<text x="${m.l - 8}" y="${Y(t) + 4}" font-size="11" text-anchor="end">${fmtPow10(t)}</text>`);
  }
  parts.push(`<text x="${(m.l + W - m.r) / 2}" y="${H - 12}" font-size="13" text-anchor="middle">h</text>`);
  if (spec.title) {
    parts.push(`<text x="${(m.l + W - m.r) / 2}" y="${m.t - 12}" font-size="14" text-anchor="middle">${spec.title}</text>`);
  }

  // reference-slope guides anchored at the coarsest datum of the first series
  if (!singleLevel) {
    const anchor = series[0];
    const iCoarse = anchor.h.indexOf(Math.max(...anchor.h));
    const h0 = anchor.h[iCoarse];
    const e0 = Math.max(...series.map((s) => s.e[iCoarse])) * 1.2;
    const hMin = Math.min(...hsAll);
    for (const p of spec.slopes) {
      const e1 = e0 * (hMin / h0) ** p;
      parts.push(
        `<line x1="${X(h0).toFixed(2)}" y1="${Y(e0).toFixed(2)}" x2="${X(hMin).toFixed(2)}" y2="${Y(e1).toFixed(2)}" ` +
          `stroke="#999" stroke-dasharray="6 4"/>`,
      );
      parts.push(`<text x="${X(hMin) + 4}" y="${Y(e1)}" font-size="11" fill="#666">h^${p}</text>`);
    }
  }

  series.forEach((s, k) => {
    const color = PALETTE[k % PALETTE.length];
    const mk = MARKERS[k % MARKERS.length];
    const order = s.h.map((_, i) => i).sort((a, b) => s.h[b] - s.h[a]);
    const pts = order.map((i) => [X(s.h[i]), Y(s.e[i])] as const);
    if (!singleLevel) {
      const d = pts.map(([x, y], i) => `${i === 0 ? "M" : "L"} ${x.toFixed(2)} ${y.toFixed(2)}`).join(" ");
      parts.push(`<path d="${d}" fill="none" stroke="${color}" stroke-width="1.6" class="series" data-name="${s.name}"/>`);
    }
    for (const [x, y] of pts) {
      parts.push(marker(mk, x, y, color));
    }
    const ly = m.t + 16 + 18 * k;
    parts.push(`<line x1="${W - m.r + 10}" y1="${ly - 4}" x2="${W - m.r + 34}" y2="${ly - 4}" stroke="${color}" stroke-width="1.6"/>`);
    parts.push(`<text x="${W - m.r + 40}" y="${ly}" font-size="12">${s.name}</text>`);
  });

  parts.push("</svg>");
  return parts.join("\n");
}
