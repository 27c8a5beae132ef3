/** Periods figure: drift of each cohomology period from its initial value.
 *
 * One curve per period_i column, plotting period_i(t) - period_i(0) on
 * a symmetric linear axis, with the maximum absolute drift over all
 * periods and records annotated on the figure.
 */

import { Diagnostics, getColumn, periodColumns } from "./csv.js";
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

export interface PeriodsFigure {
  svg: string;
  maxDrift: number;
  columns: string[];
}

export function buildPeriodsFigure(diag: Diagnostics): PeriodsFigure {
  const t = getColumn(diag, "t");
  const columns = periodColumns(diag);
  if (columns.length === 0) {
    throw new Error("no period_* columns in CSV");
  }
  const drifts = columns.map((c) => {
    const y = getColumn(diag, c);
    return y.map((v) => v - y[0]);
  });
  let maxDrift = 0;
  for (const d of drifts) {
    for (const v of d) {
      maxDrift = Math.max(maxDrift, Math.abs(v));
    }
  }
  // Symmetric range; keep a sensible floor when the drift is at the
  // round-off level so the axis stays readable.
  const lim = Math.max(maxDrift * 1.2, 1e-16);
  const tLo = Math.min(...t);
  const tHi = Math.max(...t);
  const xScale = linearScale(
    tLo,
    tHi === tLo ? tLo + 1 : tHi,
    MARGIN.left,
    WIDTH - MARGIN.right,
  );
  const yScale = linearScale(-lim, lim, HEIGHT - MARGIN.bottom, MARGIN.top);

  const body: string[] = [];
  body.push(
    frame(
      ticks(tLo, tHi === tLo ? tLo + 1 : tHi, 6),
      [-lim, -lim / 2, 0, lim / 2, lim],
      xScale,
      yScale,
      "t",
      "period drift",
      (v) => (v === 0 ? "0" : v.toExponential(1)),
    ),
  );
  body.push(
    polyline(
      [MARGIN.left, WIDTH - MARGIN.right],
      [yScale(0), yScale(0)],
      "#999999",
      "2,3",
    ),
  );
  drifts.forEach((d, idx) => {
    const color = PALETTE[idx % PALETTE.length];
    body.push(polyline(t.map(xScale), d.map(yScale), color));
    body.push(
      text(MARGIN.left + 10, MARGIN.top + 16 + 16 * idx, columns[idx], {
        size: 12,
        color,
      }),
    );
  });
  body.push(
    text(
      WIDTH - MARGIN.right - 4,
      MARGIN.top - 10,
      `max |drift| = ${maxDrift.toExponential(6)}`,
      { anchor: "end", size: 11, color: "#555555" },
    ),
  );
  body.push(
    text(MARGIN.left, MARGIN.top - 10, "period conservation", { size: 13 }),
  );
  return { svg: document(body), maxDrift, columns };
}
