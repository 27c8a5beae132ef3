import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";
import { existsSync, mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { fileURLToPath } from "node:url";
import { main } from "../src/cli.js";

const fixturePath = fileURLToPath(
  new URL("./fixtures/stability_t2.csv", import.meta.url),
);

let dir: string;

beforeEach(() => {
  dir = mkdtempSync(join(tmpdir(), "scfplot-"));
  vi.spyOn(console, "log").mockImplementation(() => {});
  vi.spyOn(console, "error").mockImplementation(() => {});
});

afterEach(() => {
  rmSync(dir, { recursive: true, force: true });
  vi.restoreAllMocks();
});

describe("scfplot CLI", () => {
  it("decay writes an SVG and reports rates", () => {
    const out = join(dir, "decay.svg");
    const rc = main([
      "decay",
      "--csv",
      fixturePath,
      "--out",
      out,
      "--columns",
      "sup_Rc",
    ]);
    expect(rc).toBe(0);
    expect(existsSync(out)).toBe(true);
    expect(readFileSync(out, "utf8")).toContain("<svg");
    const logged = vi
      .mocked(console.log)
      .mock.calls.map((c) => String(c[0]))
      .join("\n");
    expect(logged).toContain("sup_Rc: rate=");
    expect(logged).toContain("masked non-positive rows: 0");
  });

  it("decay accepts a fit window", () => {
    const out = join(dir, "decay.svg");
    const rc = main([
      "decay",
      "--csv",
      fixturePath,
      "--out",
      out,
      "--columns",
      "sup_Rc",
      "--window",
      "0.01,0.08",
    ]);
    expect(rc).toBe(0);
    const logged = vi
      .mocked(console.log)
      .mock.calls.map((c) => String(c[0]))
      .join("\n");
    expect(logged).toContain("rate=-3.968893518559e+1");
  });

  it("periods writes an SVG and reports the drift", () => {
    const out = join(dir, "periods.svg");
    const rc = main(["periods", "--csv", fixturePath, "--out", out]);
    expect(rc).toBe(0);
    expect(readFileSync(out, "utf8")).toContain("period conservation");
    const logged = vi
      .mocked(console.log)
      .mock.calls.map((c) => String(c[0]))
      .join("\n");
    expect(logged).toContain("max |drift| = 3.774758283726e-15");
  });

  it("fails cleanly on a missing column", () => {
    const rc = main([
      "decay",
      "--csv",
      fixturePath,
      "--out",
      join(dir, "x.svg"),
      "--columns",
      "nope",
    ]);
    expect(rc).toBe(1);
    const errLogged = vi
      .mocked(console.error)
      .mock.calls.map((c) => String(c[0]))
      .join("\n");
    expect(errLogged).toContain("nope");
  });

  it("fails cleanly on a missing file and a bad window", () => {
    expect(
      main(["decay", "--csv", join(dir, "none.csv"), "--out", join(dir, "x")]),
    ).toBe(1);
    expect(
      main([
        "decay",
        "--csv",
        fixturePath,
        "--out",
        join(dir, "x.svg"),
        "--window",
        "0.5,0.1",
      ]),
    ).toBe(1);
  });
});
