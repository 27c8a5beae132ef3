/** Decay-rate fit matching the primary tool.
 *
 * Least-squares slope of log(y) against t with mean-centered normal
 * equations, over rows with t inside the window; the arithmetic
 * mirrors flow.fit_decay_rate so a recomputation from the same CSV
 * rows agrees to rounding.  Non-positive samples are masked and
 * counted rather than fatal, since measured series can touch the
 * floating-point floor.
 */

export interface DecayFit {
  rate: number;
  rSquared: number;
  masked: number;
  used: number;
}

export function fitDecayRate(
  t: number[],
  y: number[],
  window?: [number, number],
): DecayFit {
  const [t0, t1] = window ?? [-Infinity, Infinity];
  const ts: number[] = [];
  const ys: number[] = [];
  let masked = 0;
  for (let i = 0; i < t.length; i++) {
    if (t[i] < t0 || t[i] > t1) continue;
    if (!(y[i] > 0)) {
      masked += 1;
      continue;
    }
    ts.push(t[i]);
    ys.push(Math.log(y[i]));
  }
  if (ts.length < 2) {
    throw new Error(
      `fit window contains ${ts.length} usable rows (need at least 2)`,
    );
  }
  const tMean = ts.reduce((a, b) => a + b, 0) / ts.length;
  const yMean = ys.reduce((a, b) => a + b, 0) / ys.length;
  let stt = 0;
  let sty = 0;
  for (let i = 0; i < ts.length; i++) {
    stt += (ts[i] - tMean) * (ts[i] - tMean);
    sty += (ts[i] - tMean) * (ys[i] - yMean);
  }
  const rate = sty / stt;
  let ssRes = 0;
  let ssTot = 0;
  for (let i = 0; i < ts.length; i++) {
    const resid = ys[i] - yMean - rate * (ts[i] - tMean);
    ssRes += resid * resid;
    ssTot += (ys[i] - yMean) * (ys[i] - yMean);
  }
  const rSquared = ssTot > 0 ? 1 - ssRes / ssTot : 1;
  return { rate, rSquared, masked, used: ts.length };
}
