/** Minimal reader for the solver's convergence/EOC CSV schema. */

export interface Table {
  columns: string[];
  rows: Record<string, number | string>[];
}

export function parseCsv(text: string): Table {
  const lines = text
    .split(/\r?\n/)
    .map((l) => l.trim())
    .filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new Error("empty CSV");
  }
  const columns = lines[0].split(",");
  const rows = lines.slice(1).map((line) => {
    const parts = line.split(",");
    if (parts.length !== columns.length) {
      throw new Error(`row has ${parts.length} fields, header has ${columns.length}`);
    }
    const row: Record<string, number | string> = {};
    columns.forEach((c, i) => {
      const v = Number(parts[i]);
      row[c] = Number.isFinite(v) && parts[i] !== "" ? v : parts[i];
    });
    return row;
  });
  return { columns, rows };
}

export function numericColumn(table: Table, name: string): number[] {
  if (!table.columns.includes(name)) {
    throw new Error(`missing column '${name}'; available: ${table.columns.join(", ")}`);
  }
  return table.rows.map((r) => {
    const v = r[name];
    if (typeof v !== "number" || !Number.isFinite(v)) {
      throw new Error(`non-numeric value in column '${name}'`);
    }
    return v;
  });
}
