import { describe, expect, it } from "vitest";
import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import {
  MalformedCsvError,
  MissingColumnError,
  getColumn,
  parseDiagnostics,
  periodColumns,
} from "../src/csv.js";

const fixtureText = readFileSync(
  fileURLToPath(new URL("./fixtures/stability_t2.csv", import.meta.url)),
  "utf8",
);

describe("parseDiagnostics", () => {
  it("reads the diagnostics schema", () => {
    const diag = parseDiagnostics(fixtureText);
    expect(diag.columns).toContain("t");
    expect(diag.columns).toContain("sup_N");
    expect(diag.columns).toContain("sup_Rc");
    expect(diag.length).toBeGreaterThan(10);
    const t = getColumn(diag, "t");
    expect(t[0]).toBe(0);
    for (let i = 1; i < t.length; i++) {
      expect(t[i]).toBeGreaterThan(t[i - 1]);
    }
  });

  it("finds period columns in index order", () => {
    const diag = parseDiagnostics(fixtureText);
    const cols = periodColumns(diag);
    expect(cols.length).toBeGreaterThan(0);
    expect(cols.every((c) => /^period_\d+$/.test(c))).toBe(true);
  });

  it("raises MissingColumnError with the available columns", () => {
    const diag = parseDiagnostics(fixtureText);
    try {
      getColumn(diag, "no_such_column");
      expect.unreachable();
    } catch (err) {
      expect(err).toBeInstanceOf(MissingColumnError);
      expect((err as Error).message).toContain("no_such_column");
      expect((err as Error).message).toContain("sup_N");
    }
  });

  it("rejects non-numeric cells", () => {
    expect(() => parseDiagnostics("t,sup_N\n0.0,oops\n")).toThrow(
      MalformedCsvError,
    );
  });

  it("rejects files without a t column", () => {
    expect(() => parseDiagnostics("a,b\n1,2\n")).toThrow(MissingColumnError);
  });

  it("parses a single-record file", () => {
    const diag = parseDiagnostics("t,sup_N,period_0\n0.0,1e-15,0.5\n");
    expect(diag.length).toBe(1);
    expect(getColumn(diag, "period_0")).toEqual([0.5]);
  });
});
