import { writeFileSync, mkdirSync } from "node:fs";
import { basename, dirname } from "node:path";
import { readHeaderedCsv, columnIndex, footnoteLines, EmptyInput, Table } from "./schema";
import { renderScene, AxesMode, Series } from "./svg";

export interface FigureSpec {
  /** Input CSV paths, one series (or series group) per file. */
  inputs: string[];
  /** Output SVG path. */
  out: string;
  axes?: AxesMode;
  /** Reference-slope overlays for log-log panels, e.g. [0.1595, 0.2521]. */
  slopes?: number[];
  /** Vertical guide position on the x axis. */
  marker?: number;
}

function readAll(spec: FigureSpec): Table[] {
  if (spec.inputs.length === 0) throw new EmptyInput("no input files");
  return spec.inputs.map(readHeaderedCsv);
}

function writeOut(path: string, svg: string): void {
  const dir = dirname(path);
  if (dir !== "" && dir !== ".") mkdirSync(dir, { recursive: true });
  writeFileSync(path, svg);
}

/**
 * Correlation-versus-separation panel, one series per input file.
 * Log-log by default, with optional power-law guide slopes.
 */
export function renderCorrelations(spec: FigureSpec): string {
  const tables = readAll(spec);
  const series: Series[] = tables.map((t) => {
    const [ri, vi, ei] = columnIndex(t, ["r", "value", "stderr"]);
    return {
      label: t.meta["direction"] ?? basename(t.path, ".csv"),
      points: t.rows.map((row) => ({ x: row[ri], y: row[vi], err: row[ei] })),
    };
  });
  const svg = renderScene({
    axes: spec.axes ?? "loglog",
    xLabel: "r",
    yLabel: tables[0].meta["observable"] ?? "value",
    series,
    slopes: spec.slopes,
    marker: spec.marker,
    warnings: [],
    footnotes: tables.flatMap((t) => footnoteLines(t)),
  });
  writeOut(spec.out, svg);
  return svg;
}

/**
 * Order-parameter scan: late-time density against the update probability,
 * always on linear axes, with an optional vertical marker.
 */
export function renderPhaseScan(spec: FigureSpec): string {
  const tables = readAll(spec);
  const series: Series[] = tables.map((t) => {
    const [pi, vi, ei] = columnIndex(t, ["p", "value", "stderr"]);
    return {
      label: t.meta["L"] !== undefined ? `L = ${t.meta["L"]}` : basename(t.path, ".csv"),
      points: t.rows.map((row) => ({ x: row[pi], y: row[vi], err: row[ei] })),
    };
  });
  const svg = renderScene({
    axes: "linear",
    xLabel: "p",
    yLabel: tables[0].meta["observable"] ?? "value",
    series,
    marker: spec.marker,
    warnings: [],
    footnotes: tables.flatMap((t) => footnoteLines(t)),
  });
  writeOut(spec.out, svg);
  return svg;
}

/**
 * Vacuum-overlap curve against the string weight g, one series per lattice
 * size found in the input.  Overlap should fall monotonically with g; if a
 * series does not, it is drawn as-is with a warning annotation.
 */
export function renderOverlap(spec: FigureSpec): string {
  const tables = readAll(spec);
  const series: Series[] = [];
  const warnings: string[] = [];
  for (const t of tables) {
    const [gi, xi, yi, oi] = columnIndex(t, ["g", "Lx", "Ly", "overlap"]);
    const groups = new Map<string, { x: number; y: number }[]>();
    for (const row of t.rows) {
      const key = `${row[xi]}x${row[yi]}`;
      let pts = groups.get(key);
      if (!pts) {
        pts = [];
        groups.set(key, pts);
      }
      pts.push({ x: row[gi], y: row[oi] });
    }
    for (const [label, pts] of groups) {
      pts.sort((a, b) => a.x - b.x);
      for (let i = 1; i < pts.length; i++) {
        if (pts[i].y > pts[i - 1].y + 1e-12) {
          warnings.push(`non-monotonic overlap for ${label}`);
          break;
        }
      }
      series.push({ label, points: pts });
    }
  }
  const svg = renderScene({
    axes: "linear",
    xLabel: "g",
    yLabel: "overlap",
    series,
    marker: spec.marker,
    warnings,
    footnotes: tables.flatMap((t) => footnoteLines(t)),
  });
  writeOut(spec.out, svg);
  return svg;
}
