/**
 * Deterministic SVG scene building: fixed styling, fixed number formatting,
 * no timestamps, so re-rendering identical inputs is byte-identical.
 */

export const WIDTH = 640;
export const HEIGHT = 400;
export const MARGIN = { left: 64, right: 20, top: 34, bottom: 46 };

export const PALETTE = [
  "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

export function fmt(value: number): string {
  return Number.isInteger(value) ? String(value) : value.toFixed(2);
}

export interface Scale {
  (value: number): number;
  min: number;
  max: number;
}

export function linearScale(min: number, max: number, outMin: number, outMax: number): Scale {
  const span = max - min || 1;
  const scale = ((value: number) =>
    outMin + ((value - min) / span) * (outMax - outMin)) as Scale;
  scale.min = min;
  scale.max = max;
  return scale;
}

export function logScale(min: number, max: number, outMin: number, outMax: number): Scale {
  const lo = Math.log10(Math.max(min, 1e-9));
  const hi = Math.log10(Math.max(max, min * 10));
  const span = hi - lo || 1;
  const scale = ((value: number) =>
    outMin + ((Math.log10(Math.max(value, 1e-9)) - lo) / span) * (outMax - outMin)) as Scale;
  scale.min = min;
  scale.max = max;
  return scale;
}

export function ticks(min: number, max: number, count = 5): number[] {
  const span = max - min || 1;
  const step = Math.pow(10, Math.floor(Math.log10(span / count)));
  const err = span / count / step;
  const unit = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1;
  const inc = unit * step;
  const start = Math.ceil(min / inc) * inc;
  const out: number[] = [];
  for (let v = start; v <= max + inc / 1e6; v += inc) {
    out.push(Number(v.toFixed(10)));
  }
  return out;
}

export class Svg {
  private parts: string[] = [];

  constructor(public width = WIDTH, public height = HEIGHT) {
    this.parts.push(
      `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
        `viewBox="0 0 ${width} ${height}" font-family="Helvetica,Arial,sans-serif">`,
      `<rect width="${width}" height="${height}" fill="white"/>`,
    );
  }

  raw(fragment: string): void {
    this.parts.push(fragment);
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke = "#333", width = 1, dash = ""): void {
    const d = dash ? ` stroke-dasharray="${dash}"` : "";
    this.parts.push(
      `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" y2="${fmt(y2)}" ` +
        `stroke="${stroke}" stroke-width="${width}"${d}/>`,
    );
  }

  polyline(points: [number, number][], stroke: string, width = 1.5): void {
    const path = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
    this.parts.push(
      `<polyline points="${path}" fill="none" stroke="${stroke}" stroke-width="${width}"/>`,
    );
  }

  circle(x: number, y: number, r: number, fill: string, opacity = 0.7): void {
    this.parts.push(
      `<circle cx="${fmt(x)}" cy="${fmt(y)}" r="${fmt(r)}" fill="${fill}" fill-opacity="${opacity}"/>`,
    );
  }

  rect(x: number, y: number, w: number, h: number, fill: string, stroke = "none"): void {
    this.parts.push(
      `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(w)}" height="${fmt(h)}" ` +
        `fill="${fill}" stroke="${stroke}"/>`,
    );
  }

  text(x: number, y: number, content: string, size = 11, anchor = "middle", fill = "#222"): void {
    this.parts.push(
      `<text x="${fmt(x)}" y="${fmt(y)}" font-size="${size}" text-anchor="${anchor}" ` +
        `fill="${fill}">${escapeXml(content)}</text>`,
    );
  }

  axes(xScale: Scale, yScale: Scale, xLabel: string, yLabel: string,
       xTicks: number[], yTicks: number[], xFmt = fmt, yFmt = fmt): void {
    const x0 = MARGIN.left;
    const x1 = this.width - MARGIN.right;
    const y0 = this.height - MARGIN.bottom;
    const y1 = MARGIN.top;
    this.line(x0, y0, x1, y0);
    this.line(x0, y0, x0, y1);
    for (const t of xTicks) {
      const x = xScale(t);
      this.line(x, y0, x, y0 + 4);
      this.text(x, y0 + 16, xFmt(t), 10);
    }
    for (const t of yTicks) {
      const y = yScale(t);
      this.line(x0 - 4, y, x0, y);
      this.text(x0 - 8, y + 3, yFmt(t), 10, "end");
      this.line(x0, y, x1, y, "#eee", 0.5);
    }
    this.text((x0 + x1) / 2, this.height - 10, xLabel, 12);
    this.raw(
      `<text x="16" y="${fmt((y0 + y1) / 2)}" font-size="12" text-anchor="middle" ` +
        `fill="#222" transform="rotate(-90 16 ${fmt((y0 + y1) / 2)})">${escapeXml(yLabel)}</text>`,
    );
  }

  legend(labels: string[], colors: string[]): void {
    labels.forEach((label, i) => {
      const x = MARGIN.left + 8 + i * 108;
      this.rect(x, 8, 10, 10, colors[i % colors.length]);
      this.text(x + 14, 17, label, 10, "start");
    });
  }

  title(content: string): void {
    this.text(this.width / 2, 22, content, 13);
  }

  render(): string {
    return this.parts.join("\n") + "\n</svg>\n";
  }
}

function escapeXml(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}
