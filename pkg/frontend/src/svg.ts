/** Minimal deterministic SVG assembly.
 *
 * Every figure is a fixed 720x480 canvas with a margin box, ticked
 * axes, polylines, and text labels.  All coordinates and labels are
 * formatted with fixed precision so identical input bytes give
 * identical output bytes (no timestamps, no randomness).
 */

export const WIDTH = 720;
export const HEIGHT = 480;
export const MARGIN = { left: 72, right: 24, top: 40, bottom: 48 };

export const PALETTE = [
  "#1f77b4",
  "#d62728",
  "#2ca02c",
  "#9467bd",
  "#ff7f0e",
  "#8c564b",
];

const fmt = (v: number): string => v.toFixed(2);

export interface Scale {
  (v: number): number;
}

export function linearScale(
  lo: number,
  hi: number,
  outLo: number,
  outHi: number,
): Scale {
  const span = hi - lo === 0 ? 1 : hi - lo;
  return (v: number) => outLo + ((v - lo) / span) * (outHi - outLo);
}

export function polyline(
  xs: number[],
  ys: number[],
  color: string,
  dash?: string,
): string {
  const pts = xs.map((x, i) => `${fmt(x)},${fmt(ys[i])}`).join(" ");
  const dashAttr = dash ? ` stroke-dasharray="${dash}"` : "";
  return (
    `<polyline fill="none" stroke="${color}" stroke-width="1.5"` +
    `${dashAttr} points="${pts}"/>`
  );
}

export function text(
  x: number,
  y: number,
  s: string,
  opts: { anchor?: string; size?: number; color?: string } = {},
): string {
  const anchor = opts.anchor ?? "start";
  const size = opts.size ?? 12;
  const color = opts.color ?? "#000000";
  return (
    `<text x="${fmt(x)}" y="${fmt(y)}" font-family="Helvetica,Arial,sans-serif"` +
    ` font-size="${size}" fill="${color}" text-anchor="${anchor}">${escapeXml(s)}</text>`
  );
}

export function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;");
}

/** Round tick positions covering [lo, hi]; count is approximate. */
export function ticks(lo: number, hi: number, count = 6): number[] {
  if (hi <= lo) return [lo];
  const rawStep = (hi - lo) / count;
  const mag = Math.pow(10, Math.floor(Math.log10(rawStep)));
  const norm = rawStep / mag;
  const step = (norm < 1.5 ? 1 : norm < 3.5 ? 2 : norm < 7.5 ? 5 : 10) * mag;
  const out: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + 1e-12 * step; v += step) {
    out.push(Math.abs(v) < 1e-12 * step ? 0 : v);
  }
  return out;
}

export function tickLabel(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 0.01 && a < 10000) {
    return String(parseFloat(v.toPrecision(6)));
  }
  return v.toExponential(1);
}

export function frame(
  xTicks: number[],
  yTicks: number[],
  xScale: Scale,
  yScale: Scale,
  xLabel: string,
  yLabel: string,
  yTickLabel: (v: number) => string = tickLabel,
): string {
  const { left, right, top, bottom } = MARGIN;
  const x0 = left;
  const x1 = WIDTH - right;
  const y0 = HEIGHT - bottom;
  const y1 = top;
  const parts: string[] = [];
  parts.push(
    `<rect x="${x0}" y="${y1}" width="${x1 - x0}" height="${y0 - y1}"` +
      ` fill="none" stroke="#000000" stroke-width="1"/>`,
  );
  for (const v of xTicks) {
    const x = xScale(v);
    parts.push(
      `<line x1="${fmt(x)}" y1="${y0}" x2="${fmt(x)}" y2="${y0 + 5}"` +
        ` stroke="#000000" stroke-width="1"/>`,
    );
    parts.push(text(x, y0 + 18, tickLabel(v), { anchor: "middle", size: 11 }));
  }
  for (const v of yTicks) {
    const y = yScale(v);
    parts.push(
      `<line x1="${x0 - 5}" y1="${fmt(y)}" x2="${x0}" y2="${fmt(y)}"` +
        ` stroke="#000000" stroke-width="1"/>`,
    );
    parts.push(
      text(x0 - 8, y + 4, yTickLabel(v), { anchor: "end", size: 11 }),
    );
  }
  parts.push(
    text((x0 + x1) / 2, HEIGHT - 12, xLabel, { anchor: "middle", size: 13 }),
  );
  parts.push(
    `<g transform="translate(16,${(y0 + y1) / 2}) rotate(-90)">` +
      text(0, 0, yLabel, { anchor: "middle", size: 13 }) +
      `</g>`,
  );
  return parts.join("\n");
}

export function document(body: string[]): string {
  return (
    `<?xml version="1.0" encoding="UTF-8"?>\n` +
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}"` +
    ` height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}">\n` +
    `<rect width="${WIDTH}" height="${HEIGHT}" fill="#ffffff"/>\n` +
    body.join("\n") +
    `\n</svg>\n`
  );
}
