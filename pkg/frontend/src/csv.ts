/** Reading the diagnostics CSV written by the flow module.
 *
 * The schema is one header row followed by plain decimal columns:
 * t, dt, sup_N, l2_N, sup_Rc, sup_domega, compat_defect, sup_rhs_g,
 * sup_rhs_omega, sup_rhs_J, sup_X, period_*, p_period_*.
 */

import Papa from "papaparse";

export class MissingColumnError extends Error {
  constructor(public readonly column: string, available: string[]) {
    super(
      `column '${column}' not in CSV (available: ${available.join(", ")})`,
    );
    this.name = "MissingColumnError";
  }
}

export class MalformedCsvError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "MalformedCsvError";
  }
}

export interface Diagnostics {
  columns: string[];
  /** column name -> values, one entry per record, in file order */
  series: Map<string, number[]>;
  length: number;
}

export function parseDiagnostics(text: string): Diagnostics {
  const parsed = Papa.parse<Record<string, string>>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const e = parsed.errors[0];
    throw new MalformedCsvError(`row ${e.row}: ${e.message}`);
  }
  const columns = (parsed.meta.fields ?? []).filter((c) => c.length > 0);
  if (!columns.includes("t")) {
    throw new MissingColumnError("t", columns);
  }
  const series = new Map<string, number[]>(columns.map((c) => [c, []]));
  for (const row of parsed.data) {
    for (const c of columns) {
      const raw = row[c];
      const v = raw === undefined || raw === "" ? NaN : Number(raw);
      if (Number.isNaN(v)) {
        throw new MalformedCsvError(`non-numeric value '${raw}' in ${c}`);
      }
      series.get(c)!.push(v);
    }
  }
  return { columns, series, length: series.get("t")!.length };
}

export function getColumn(diag: Diagnostics, name: string): number[] {
  const col = diag.series.get(name);
  if (col === undefined) {
    throw new MissingColumnError(name, diag.columns);
  }
  return col;
}

export function periodColumns(diag: Diagnostics): string[] {
  return diag.columns.filter((c) => /^period_\d+$/.test(c));
}
