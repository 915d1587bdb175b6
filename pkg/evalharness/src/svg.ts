/** Dependency-free SVG line/step plots, one file per chart. */

export interface Series {
  label: string;
  xs: number[];
  ys: number[];
  /** render as a right-continuous step function */
  step?: boolean;
  /** dashed stroke (used for raw points behind rolling means) */
  dashed?: boolean;
}

export interface PlotOptions {
  title: string;
  xLabel: string;
  yLabel: string;
  width?: number;
  height?: number;
  yMin?: number;
  yMax?: number;
  /** extra legend lines, e.g. failure-mark counts */
  notes?: string[];
}

const PALETTE = [
  "#1f77b4",
  "#d62728",
  "#2ca02c",
  "#9467bd",
  "#ff7f0e",
  "#8c564b",
  "#17becf",
  "#7f7f7f",
];

function ticks(lo: number, hi: number, count = 5): number[] {
  if (hi <= lo) return [lo];
  const out: number[] = [];
  for (let i = 0; i <= count; i++) out.push(lo + ((hi - lo) * i) / count);
  return out;
}

function fmt(value: number): string {
  const rounded = Number(value.toPrecision(4));
  return String(rounded);
}

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;");
}

export function linePlot(series: Series[], opts: PlotOptions): string {
  const width = opts.width ?? 640;
  const height = opts.height ?? 400;
  const margin = { top: 34, right: 16, bottom: 44, left: 56 };
  const plotW = width - margin.left - margin.right;
  const plotH = height - margin.top - margin.bottom;

  const allX = series.flatMap((s) => s.xs);
  const allY = series.flatMap((s) => s.ys);
  if (allX.length === 0) throw new Error("plot with no points");
  const xLo = Math.min(...allX);
  const xHi = Math.max(...allX, xLo + 1e-9);
  const yLo = opts.yMin ?? Math.min(0, ...allY);
  const yHi = opts.yMax ?? Math.max(...allY, yLo + 1e-9);

  const sx = (x: number) => margin.left + ((x - xLo) / (xHi - xLo)) * plotW;
  const sy = (y: number) =>
    margin.top + plotH - ((y - yLo) / (yHi - yLo)) * plotH;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" ` +
      `height="${height}" viewBox="0 0 ${width} ${height}" ` +
      `font-family="sans-serif" font-size="12">`,
  );
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);
  parts.push(
    `<text x="${width / 2}" y="18" text-anchor="middle" ` +
      `font-size="14" font-weight="bold">${esc(opts.title)}</text>`,
  );

  for (const t of ticks(xLo, xHi)) {
    const x = sx(t);
    parts.push(
      `<line x1="${x}" y1="${margin.top}" x2="${x}" ` +
        `y2="${margin.top + plotH}" stroke="#ddd"/>`,
      `<text x="${x}" y="${margin.top + plotH + 16}" ` +
        `text-anchor="middle">${fmt(t)}</text>`,
    );
  }
  for (const t of ticks(yLo, yHi)) {
    const y = sy(t);
    parts.push(
      `<line x1="${margin.left}" y1="${y}" ` +
        `x2="${margin.left + plotW}" y2="${y}" stroke="#ddd"/>`,
      `<text x="${margin.left - 6}" y="${y + 4}" ` +
        `text-anchor="end">${fmt(t)}</text>`,
    );
  }
  parts.push(
    `<rect x="${margin.left}" y="${margin.top}" width="${plotW}" ` +
      `height="${plotH}" fill="none" stroke="#333"/>`,
    `<text x="${margin.left + plotW / 2}" y="${height - 8}" ` +
      `text-anchor="middle">${esc(opts.xLabel)}</text>`,
    `<text x="16" y="${margin.top + plotH / 2}" text-anchor="middle" ` +
      `transform="rotate(-90 16 ${margin.top + plotH / 2})">` +
      `${esc(opts.yLabel)}</text>`,
  );

  series.forEach((s, idx) => {
    const color = PALETTE[idx % PALETTE.length];
    const cmds: string[] = [];
    for (let i = 0; i < s.xs.length; i++) {
      const x = sx(s.xs[i]);
      const y = sy(s.ys[i]);
      if (i === 0) {
        cmds.push(`M${x.toFixed(2)},${y.toFixed(2)}`);
      } else if (s.step) {
        cmds.push(`H${x.toFixed(2)}`, `V${y.toFixed(2)}`);
      } else {
        cmds.push(`L${x.toFixed(2)},${y.toFixed(2)}`);
      }
    }
    if (s.step && s.xs.length > 0) {
      cmds.push(`H${sx(xHi).toFixed(2)}`);
    }
    const dash = s.dashed ? ' stroke-dasharray="4 3" opacity="0.6"' : "";
    parts.push(
      `<path d="${cmds.join(" ")}" fill="none" stroke="${color}" ` +
        `stroke-width="1.8"${dash}/>`,
    );
    const ly = margin.top + 10 + idx * 16;
    parts.push(
      `<line x1="${margin.left + plotW - 130}" y1="${ly}" ` +
        `x2="${margin.left + plotW - 110}" y2="${ly}" ` +
        `stroke="${color}" stroke-width="1.8"${dash}/>`,
      `<text x="${margin.left + plotW - 104}" y="${ly + 4}">` +
        `${esc(s.label)}</text>`,
    );
  });

  (opts.notes ?? []).forEach((note, idx) => {
    parts.push(
      `<text x="${margin.left + plotW - 130}" ` +
        `y="${margin.top + 10 + (series.length + idx) * 16 + 4}" ` +
        `fill="#555">${esc(note)}</text>`,
    );
  });

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
