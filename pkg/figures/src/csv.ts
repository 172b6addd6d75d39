/**
 * Minimal CSV reader for the stable metric schemas.
 *
 * Fails loudly when an expected column is missing and never silently drops
 * rows; the simulator writes plain comma-separated values without quoting.
 */

import { readFileSync } from "node:fs";

export interface Table {
  columns: string[];
  rows: string[][];
}

export class SchemaError extends Error {}

export function readCsv(path: string): Table {
  const text = readFileSync(path, "utf8");
  const lines = text.split("\n")
    .map((line) => (line.endsWith("\r") ? line.slice(0, -1) : line))
    .filter((line) => line.length > 0);
  if (lines.length === 0) {
    throw new SchemaError(`${path}: empty file`);
  }
  const columns = lines[0].split(",");
  const rows = lines.slice(1).map((line, i) => {
    const cells = line.split(",");
    if (cells.length !== columns.length) {
      throw new SchemaError(
        `${path}: row ${i + 2} has ${cells.length} cells, expected ${columns.length}`,
      );
    }
    return cells;
  });
  return { columns, rows };
}

/** Column accessor that reports exactly which column a file is missing. */
export function column(table: Table, name: string, path = ""): string[] {
  const idx = table.columns.indexOf(name);
  if (idx < 0) {
    throw new SchemaError(
      `${path}: missing column '${name}' (have: ${table.columns.join(", ")})`,
    );
  }
  return table.rows.map((row) => row[idx]);
}

export function numericColumn(table: Table, name: string, path = ""): number[] {
  return column(table, name, path).map((cell, i) => {
    const value = Number(cell);
    if (!Number.isFinite(value)) {
      throw new SchemaError(`${path}: non-numeric '${cell}' in ${name} row ${i + 2}`);
    }
    return value;
  });
}
