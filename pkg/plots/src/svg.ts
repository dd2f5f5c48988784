import { EmptyInput } from "./schema";

// Deterministic SVG rendering: fixed canvas, fixed fonts, no timestamps, no
// randomness.  The same scene always serializes to the same bytes.

export type AxesMode = "loglog" | "linlog" | "linear";

export interface Point {
  x: number;
  y: number;
  err?: number;
}

export interface Series {
  label: string;
  points: Point[];
}

export interface Scene {
  axes: AxesMode;
  xLabel: string;
  yLabel: string;
  series: Series[];
  /** Power-law guide lines; only meaningful on log-log axes. */
  slopes?: number[];
  /** Vertical guide at this x position. */
  marker?: number;
  warnings: string[];
  footnotes: string[];
}

const WIDTH = 720;
const PLOT = { left: 76, top: 26, width: 620, height: 380 };
const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#17becf"];

/** Pixel coordinate formatting: two decimals, trailing zeros trimmed. */
export function fmt(v: number): string {
  let s = v.toFixed(2);
  if (s.includes(".")) s = s.replace(/0+$/, "").replace(/\.$/, "");
  return s === "-0" ? "0" : s;
}

/** Tick/marker label formatting: 4 significant digits, trimmed. */
export function fmtTick(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(0).replace("e+", "e");
  let s = v.toPrecision(4);
  if (s.includes(".")) s = s.replace(/0+$/, "").replace(/\.$/, "");
  return s;
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;").replace(/"/g, "&quot;");
}

interface Axis {
  log: boolean;
  min: number;
  max: number;
  px(v: number): number;
}

function makeAxis(values: number[], log: boolean, pxLo: number, pxHi: number, padToZero: boolean): Axis {
  const usable = log ? values.filter((v) => v > 0) : values;
  if (usable.length === 0) throw new EmptyInput("no plottable points for a log axis");
  let lo = Math.min(...usable);
  let hi = Math.max(...usable);
  if (log) {
    let a = Math.log10(lo);
    let b = Math.log10(hi);
    if (b - a < 1e-12) {
      a -= 0.5;
      b += 0.5;
    }
    const pad = 0.05 * (b - a);
    a -= pad;
    b += pad;
    lo = Math.pow(10, a);
    hi = Math.pow(10, b);
    return {
      log,
      min: lo,
      max: hi,
      px: (v) => pxLo + ((Math.log10(v) - a) / (b - a)) * (pxHi - pxLo),
    };
  }
  if (padToZero && lo > 0) lo = 0;
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const pad = 0.05 * (hi - lo);
  const lo2 = lo === 0 ? 0 : lo - pad;
  const hi2 = hi + pad;
  return {
    log,
    min: lo2,
    max: hi2,
    px: (v) => pxLo + ((v - lo2) / (hi2 - lo2)) * (pxHi - pxLo),
  };
}

function linearTicks(min: number, max: number): number[] {
  const span = max - min;
  const raw = span / 5;
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  const norm = raw / mag;
  const step = (norm < 1.5 ? 1 : norm < 3.5 ? 2 : norm < 7.5 ? 5 : 10) * mag;
  const ticks: number[] = [];
  for (let t = Math.ceil(min / step) * step; t <= max + step * 1e-9; t += step) {
    ticks.push(Math.abs(t) < step * 1e-9 ? 0 : t);
  }
  return ticks;
}

function logTicks(min: number, max: number): number[] {
  const pick = (mantissas: number[]) => {
    const ticks: number[] = [];
    const k0 = Math.floor(Math.log10(min)) - 1;
    const k1 = Math.ceil(Math.log10(max));
    for (let k = k0; k <= k1; k++) {
      for (const m of mantissas) {
        const v = m * Math.pow(10, k);
        if (v >= min * (1 - 1e-9) && v <= max * (1 + 1e-9)) ticks.push(v);
      }
    }
    return ticks;
  };
  const coarse = pick([1, 2, 5]);
  return coarse.length >= 3 ? coarse : pick([1, 1.5, 2, 3, 4, 5, 6, 7, 8, 9]);
}

export function renderScene(scene: Scene): string {
  const { left, top, width, height } = PLOT;
  const right = left + width;
  const bottom = top + height;
  const logX = scene.axes === "loglog";
  const logY = scene.axes !== "linear";

  // Drop points a log axis cannot place; keep everything on linear axes.
  const plotted = scene.series.map((s) => ({
    label: s.label,
    points: s.points.filter((p) => (!logX || p.x > 0) && (!logY || p.y > 0)),
  }));
  if (plotted.every((s) => s.points.length === 0)) {
    throw new EmptyInput("no plottable points");
  }

  const xVals: number[] = [];
  const yVals: number[] = [];
  for (const s of plotted) {
    for (const p of s.points) {
      xVals.push(p.x);
      yVals.push(p.y);
      if (p.err !== undefined && p.err > 0) {
        yVals.push(p.y + p.err);
        const lower = p.y - p.err;
        if (!logY || lower > 0) yVals.push(lower);
      }
    }
  }
  if (scene.marker !== undefined) xVals.push(scene.marker);

  // Power-law guides sit a fixed offset above the data cloud in log space;
  // their endpoints participate in the y range so they are never clipped.
  const slopes = logX && logY ? scene.slopes ?? [] : [];
  const guides: { slope: number; x0: number; y0: number; x1: number; y1: number }[] = [];
  if (slopes.length > 0) {
    const lxs = xVals.filter((v) => v > 0).map(Math.log10);
    const lys = yVals.filter((v) => v > 0).map(Math.log10);
    const lxMin = Math.min(...lxs);
    const lxMax = Math.max(...lxs);
    const cx = (lxMin + lxMax) / 2;
    const cy = lys.reduce((a, b) => a + b, 0) / lys.length;
    const g0 = lxMin + 0.12 * (lxMax - lxMin);
    const g1 = lxMax - 0.12 * (lxMax - lxMin);
    slopes.forEach((s, i) => {
      const at = (lx: number) => cy + 0.3 + 0.25 * i - s * (lx - cx);
      const g = {
        slope: s,
        x0: Math.pow(10, g0),
        y0: Math.pow(10, at(g0)),
        x1: Math.pow(10, g1),
        y1: Math.pow(10, at(g1)),
      };
      guides.push(g);
      yVals.push(g.y0, g.y1);
    });
  }

  const ax = makeAxis(xVals, logX, left, right, false);
  const ay = makeAxis(yVals, logY, bottom, top, !logY);

  const foot = scene.footnotes;
  const totalH = bottom + 46 + (foot.length > 0 ? 12 * foot.length + 8 : 0);

  const el: string[] = [];
  el.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${totalH}" ` +
      `viewBox="0 0 ${WIDTH} ${totalH}" font-family="DejaVu Sans Mono, monospace" data-axes="${scene.axes}">`
  );
  el.push(`<rect width="${WIDTH}" height="${totalH}" fill="#ffffff"/>`);

  // ticks + grid
  const xTicks = logX ? logTicks(ax.min, ax.max) : linearTicks(ax.min, ax.max);
  const yTicks = logY ? logTicks(ay.min, ay.max) : linearTicks(ay.min, ay.max);
  for (const t of xTicks) {
    const x = fmt(ax.px(t));
    el.push(`<line x1="${x}" y1="${top}" x2="${x}" y2="${bottom}" stroke="#dddddd"/>`);
    el.push(`<line x1="${x}" y1="${bottom}" x2="${x}" y2="${bottom + 5}" stroke="#000000"/>`);
    el.push(`<text x="${x}" y="${bottom + 18}" font-size="11" text-anchor="middle">${esc(fmtTick(t))}</text>`);
  }
  for (const t of yTicks) {
    const y = fmt(ay.px(t));
    el.push(`<line x1="${left}" y1="${y}" x2="${right}" y2="${y}" stroke="#dddddd"/>`);
    el.push(`<line x1="${left - 5}" y1="${y}" x2="${left}" y2="${y}" stroke="#000000"/>`);
    el.push(`<text x="${left - 8}" y="${y}" font-size="11" text-anchor="end" dominant-baseline="middle">${esc(fmtTick(t))}</text>`);
  }

  el.push(
    `<rect class="frame" x="${left}" y="${top}" width="${width}" height="${height}" fill="none" stroke="#000000" ` +
      `data-xmin="${ax.min}" data-xmax="${ax.max}" data-ymin="${ay.min}" data-ymax="${ay.max}"/>`
  );
  el.push(
    `<text x="${left + width / 2}" y="${bottom + 36}" font-size="12" text-anchor="middle">${esc(scene.xLabel)}</text>`
  );
  el.push(
    `<text x="18" y="${top + height / 2}" font-size="12" text-anchor="middle" ` +
      `transform="rotate(-90 18 ${top + height / 2})">${esc(scene.yLabel)}</text>`
  );

  plotted.forEach((s, si) => {
    if (s.points.length === 0) return;
    const color = PALETTE[si % PALETTE.length];
    for (const p of s.points) {
      if (p.err === undefined || p.err <= 0) continue;
      const x = fmt(ax.px(p.x));
      const hi = ay.px(Math.min(p.y + p.err, ay.max));
      const lowVal = logY ? Math.max(p.y - p.err, ay.min) : Math.max(p.y - p.err, ay.min);
      const lo = ay.px(lowVal);
      el.push(`<line class="errorbar" x1="${x}" y1="${fmt(lo)}" x2="${x}" y2="${fmt(hi)}" stroke="${color}"/>`);
    }
    const coords = s.points.map((p) => `${fmt(ax.px(p.x))},${fmt(ay.px(p.y))}`).join(" ");
    el.push(
      `<polyline class="series" data-label="${esc(s.label)}" points="${coords}" fill="none" stroke="${color}" stroke-width="1.5"/>`
    );
    for (const p of s.points) {
      el.push(`<circle cx="${fmt(ax.px(p.x))}" cy="${fmt(ay.px(p.y))}" r="2.5" fill="${color}"/>`);
    }
  });

  for (const g of guides) {
    el.push(
      `<line class="guide" data-slope="${g.slope}" x1="${fmt(ax.px(g.x0))}" y1="${fmt(ay.px(g.y0))}" ` +
        `x2="${fmt(ax.px(g.x1))}" y2="${fmt(ay.px(g.y1))}" stroke="#555555" stroke-dasharray="6 4"/>`
    );
    el.push(
      `<text class="guide-label" x="${fmt(ax.px(g.x1) + 5)}" y="${fmt(ay.px(g.y1) + 4)}" font-size="11" ` +
        `fill="#555555">${esc(`${scene.xLabel}^-${g.slope}`)}</text>`
    );
  }

  if (scene.marker !== undefined) {
    const x = fmt(ax.px(scene.marker));
    el.push(
      `<line class="marker" data-x="${scene.marker}" x1="${x}" y1="${top}" x2="${x}" y2="${bottom}" ` +
        `stroke="#333333" stroke-dasharray="4 3"/>`
    );
    el.push(
      `<text class="marker-label" x="${fmt(ax.px(scene.marker) + 5)}" y="${top + 14}" font-size="11" ` +
        `fill="#333333">${esc(`${scene.xLabel} = ${fmtTick(scene.marker)}`)}</text>`
    );
  }

  plotted.forEach((s, si) => {
    const color = PALETTE[si % PALETTE.length];
    const y = top + 16 + 16 * si;
    el.push(`<line x1="${right - 130}" y1="${y - 4}" x2="${right - 110}" y2="${y - 4}" stroke="${color}" stroke-width="1.5"/>`);
    el.push(`<text class="legend" x="${right - 104}" y="${y}" font-size="11" fill="${color}">${esc(s.label)}</text>`);
  });

  scene.warnings.forEach((w, i) => {
    el.push(
      `<text class="warning" x="${left + 8}" y="${top + 16 + 14 * i}" font-size="11" fill="#cc0000">${esc(`warning: ${w}`)}</text>`
    );
  });

  foot.forEach((line, i) => {
    el.push(
      `<text class="footnote" x="${left}" y="${bottom + 52 + 12 * i}" font-size="9" fill="#666666">${esc(line)}</text>`
    );
  });

  el.push("</svg>");
  return el.join("\n") + "\n";
}
