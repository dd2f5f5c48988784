import { readFileSync } from "node:fs";
import { basename } from "node:path";

/** Input file violates the headered-CSV layout (bad header line, wrong
 *  columns, non-numeric cell, ...). */
export class SchemaError extends Error {
  override name = "SchemaError";
}

/** Input parses but carries no data rows, or no inputs were given at all. */
export class EmptyInput extends Error {
  override name = "EmptyInput";
}

export interface Table {
  path: string;
  /** `# key = value` header lines, in file order. */
  meta: Record<string, string>;
  columns: string[];
  /** One entry per data row, columns in file order. */
  rows: number[][];
}

/**
 * Read one artifact CSV: optional `# key = value` comment lines, then a
 * column-name row, then numeric data rows.
 */
export function readHeaderedCsv(path: string): Table {
  const text = readFileSync(path, "utf8");
  const lines = text.split(/\r?\n/);
  while (lines.length && lines[lines.length - 1] === "") lines.pop();

  const meta: Record<string, string> = {};
  let i = 0;
  for (; i < lines.length && lines[i].startsWith("#"); i++) {
    const body = lines[i].replace(/^#\s*/, "");
    const eq = body.indexOf(" = ");
    if (eq < 0) throw new SchemaError(`${path}: malformed header line ${i + 1}: ${lines[i]}`);
    meta[body.slice(0, eq)] = body.slice(eq + 3);
  }

  if (i >= lines.length) throw new EmptyInput(`${path}: no data`);
  const columns = lines[i].split(",");
  i++;

  const rows: number[][] = [];
  for (; i < lines.length; i++) {
    const cells = lines[i].split(",");
    if (cells.length !== columns.length) {
      throw new SchemaError(
        `${path}: line ${i + 1} has ${cells.length} cells, expected ${columns.length}`
      );
    }
    const row = cells.map((c, j) => {
      const v = Number(c);
      if (c.trim() === "" || Number.isNaN(v)) {
        throw new SchemaError(`${path}: line ${i + 1}, column "${columns[j]}": not a number: "${c}"`);
      }
      return v;
    });
    rows.push(row);
  }
  if (rows.length === 0) throw new EmptyInput(`${path}: no data rows`);

  return { path, meta, columns, rows };
}

/** Index of each named column, or SchemaError naming the first one missing. */
export function columnIndex(t: Table, names: string[]): number[] {
  return names.map((n) => {
    const k = t.columns.indexOf(n);
    if (k < 0) throw new SchemaError(`${t.path}: missing column "${n}" (have: ${t.columns.join(",")})`);
    return k;
  });
}

/** Caption-footnote lines for a table: basename plus its header metadata. */
export function footnoteLines(t: Table, width = 150): string[] {
  const pairs = Object.entries(t.meta).map(([k, v]) => `${k} = ${v}`);
  const full = `${basename(t.path)}: ${pairs.join(", ")}`;
  // deterministic wrap so long rule tables don't run off the canvas
  const out: string[] = [];
  let line = "";
  for (const word of full.split(" ")) {
    const cand = line === "" ? word : line + " " + word;
    if (cand.length > width && line !== "") {
      out.push(line);
      line = "      " + word;
    } else {
      line = cand;
    }
  }
  if (line !== "") out.push(line);
  return out;
}
