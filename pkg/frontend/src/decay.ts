/** Decay figure: diagnostics series on a log axis with fitted rates.
 *
 * Each requested column is drawn as log10(y) against t, with the
 * least-squares exponential fit overlaid as a dashed line and the
 * fitted rate annotated in the legend.  Rows with non-positive values
 * cannot appear on a log axis; they are dropped from both the curve
 * and the fit, and the drop count is annotated on the figure.
 */

import { Diagnostics, getColumn } from "./csv.js";
import { DecayFit, fitDecayRate } from "./fit.js";
import {
  HEIGHT,
  MARGIN,
  PALETTE,
  WIDTH,
  document,
  frame,
  linearScale,
  polyline,
  text,
  ticks,
} from "./svg.js";

export const DEFAULT_DECAY_COLUMNS = ["sup_Rc", "sup_N"];

export interface ColumnResult {
  column: string;
  fit: DecayFit | null;
}

export interface DecayFigure {
  svg: string;
  results: ColumnResult[];
  masked: number;
}

function sci(v: number, digits = 6): string {
  return v.toExponential(digits);
}

export function buildDecayFigure(
  diag: Diagnostics,
  columns: string[] = DEFAULT_DECAY_COLUMNS,
  window?: [number, number],
): DecayFigure {
  const t = getColumn(diag, "t");
  const curves: { column: string; ts: number[]; logs: number[] }[] = [];
  const results: ColumnResult[] = [];
  let masked = 0;
  for (const column of columns) {
    const y = getColumn(diag, column);
    const ts: number[] = [];
    const logs: number[] = [];
    for (let i = 0; i < t.length; i++) {
      if (y[i] > 0) {
        ts.push(t[i]);
        logs.push(Math.log10(y[i]));
      } else {
        masked += 1;
      }
    }
    let fit: DecayFit | null = null;
    try {
      fit = fitDecayRate(t, y, window);
    } catch {
      fit = null;
    }
    curves.push({ column, ts, logs });
    results.push({ column, fit });
  }

  const allT = curves.flatMap((c) => c.ts);
  const allLog = curves.flatMap((c) => c.logs);
  if (allT.length === 0) {
    throw new Error("no positive samples to plot on a log axis");
  }
  const tLo = Math.min(...allT);
  const tHi = Math.max(...allT);
  const lLo = Math.floor(Math.min(...allLog));
  const lHi = Math.ceil(Math.max(...allLog));
  const xScale = linearScale(tLo, tHi, MARGIN.left, WIDTH - MARGIN.right);
  const yScale = linearScale(
    lLo,
    lHi === lLo ? lLo + 1 : lHi,
    HEIGHT - MARGIN.bottom,
    MARGIN.top,
  );

  const body: string[] = [];
  const yTicks = ticks(lLo, lHi === lLo ? lLo + 1 : lHi, 6).filter(
    (v) => Number.isInteger(v),
  );
  body.push(
    frame(
      ticks(tLo, tHi, 6),
      yTicks,
      xScale,
      yScale,
      "t",
      "diagnostic (log10)",
      (v) => `1e${v}`,
    ),
  );
  curves.forEach((c, idx) => {
    const color = PALETTE[idx % PALETTE.length];
    body.push(
      polyline(c.ts.map(xScale), c.logs.map(yScale), color),
    );
    const fit = results[idx].fit;
    if (fit !== null) {
      // Overlay exp(a + rate*t) through the fit window endpoints.
      const [w0, w1] = window ?? [tLo, tHi];
      const f0 = Math.max(w0, tLo);
      const f1 = Math.min(w1, tHi);
      // Anchor the dashed line at the first plotted point inside the window.
      let anchorT = f0;
      let anchorL = c.logs.length > 0 ? c.logs[0] : 0;
      for (let i = 0; i < c.ts.length; i++) {
        if (c.ts[i] >= f0) {
          anchorT = c.ts[i];
          anchorL = c.logs[i];
          break;
        }
      }
      const slope10 = fit.rate / Math.LN10;
      body.push(
        polyline(
          [xScale(anchorT), xScale(f1)],
          [yScale(anchorL), yScale(anchorL + slope10 * (f1 - anchorT))],
          color,
          "6,4",
        ),
      );
    }
    const label =
      fit === null
        ? `${c.column} (fit unavailable)`
        : `${c.column}: rate ${sci(fit.rate)}, r2 ${fit.rSquared.toFixed(6)}`;
    body.push(
      text(MARGIN.left + 10, MARGIN.top + 16 + 16 * idx, label, {
        size: 12,
        color,
      }),
    );
  });
  body.push(
    text(
      WIDTH - MARGIN.right - 4,
      MARGIN.top - 10,
      `masked non-positive rows: ${masked}`,
      { anchor: "end", size: 11, color: "#555555" },
    ),
  );
  body.push(
    text(MARGIN.left, MARGIN.top - 10, "diagnostic decay", { size: 13 }),
  );
  return { svg: document(body), results, masked };
}
