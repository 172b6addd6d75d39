/**
 * The six paper-style figure kinds, rendered from the simulator's metric
 * CSV schemas into deterministic SVG.
 */

import { column, numericColumn, readCsv, SchemaError } from "./csv.js";
import { fmt, linearScale, logScale, MARGIN, PALETTE, Scale, Svg, ticks, WIDTH, HEIGHT } from "./svg.js";

export interface LabeledInput {
  label: string;
  path: string;
}

export const PROTOCOL_ORDER = [
  "ndn", "hopp", "inot",
  "coap-put-con", "coap-put-non", "coap-get-con", "coap-get-non", "coap-observe",
  "mqtt-q0", "mqtt-q1",
];

export function orderInputs(inputs: LabeledInput[]): LabeledInput[] {
  return [...inputs].sort((a, b) => {
    const ia = PROTOCOL_ORDER.indexOf(a.label);
    const ib = PROTOCOL_ORDER.indexOf(b.label);
    if (ia !== ib) return (ia < 0 ? 99 : ia) - (ib < 0 ? 99 : ib);
    return a.label < b.label ? -1 : 1;
  });
}

const plotRight = () => WIDTH - MARGIN.right;
const plotBottom = () => HEIGHT - MARGIN.bottom;

/** Time-to-content CDFs; x axis in milliseconds, optionally logarithmic. */
export function renderTtcCdf(inputs: LabeledInput[], logX = false): string {
  const series = orderInputs(inputs).map((input) => {
    const table = readCsv(input.path);
    const values = numericColumn(table, "ttc_us", input.path)
      .map((us) => us / 1000)
      .sort((a, b) => a - b);
    return { label: input.label, values };
  });
  const all = series.flatMap((s) => s.values);
  if (all.length === 0) {
    throw new SchemaError("no ttc samples in any input");
  }
  const xMax = Math.max(...all);
  const xMin = logX ? Math.max(Math.min(...all), 0.1) : 0;
  const x = logX
    ? logScale(xMin, xMax, MARGIN.left, plotRight())
    : linearScale(0, xMax, MARGIN.left, plotRight());
  const y = linearScale(0, 1, plotBottom(), MARGIN.top);
  const svg = new Svg();
  svg.title("Time to content arrival (CDF)");
  const xTicks = logX ? logTicks(xMin, xMax) : ticks(0, xMax);
  svg.axes(x, y, logX ? "time to content [ms, log]" : "time to content [ms]",
           "CDF", xTicks, ticks(0, 1));
  series.forEach((s, i) => {
    const points: [number, number][] = [[x(logX ? xMin : 0), y(0)]];
    s.values.forEach((v, j) => {
      points.push([x(v), y(j / s.values.length)]);
      points.push([x(v), y((j + 1) / s.values.length)]);
    });
    points.push([x(xMax), y(1)]);
    svg.polyline(points, PALETTE[i % PALETTE.length]);
  });
  svg.legend(series.map((s) => s.label), PALETTE);
  return svg.render();
}

function logTicks(min: number, max: number): number[] {
  const out: number[] = [];
  for (let e = Math.floor(Math.log10(Math.max(min, 1e-9))); Math.pow(10, e) <= max; e++) {
    out.push(Math.pow(10, e));
  }
  return out;
}

/** Data-loss bars per protocol. */
export function renderLossBars(inputs: LabeledInput[]): string {
  const bars = orderInputs(inputs).map((input) => {
    const table = readCsv(input.path);
    const loss = numericColumn(table, "loss_rate", input.path);
    return { label: input.label, loss: loss[0] ?? 0 };
  });
  const yMax = Math.max(0.05, ...bars.map((b) => b.loss)) * 1.15;
  const y = linearScale(0, yMax, plotBottom(), MARGIN.top);
  const svg = new Svg();
  svg.title("Data loss");
  svg.axes(linearScale(0, 1, MARGIN.left, plotRight()), y, "", "loss rate",
           [], ticks(0, yMax), fmt, (v) => v.toFixed(2));
  const span = plotRight() - MARGIN.left;
  const slot = span / bars.length;
  bars.forEach((bar, i) => {
    const xPos = MARGIN.left + i * slot + slot * 0.2;
    svg.rect(xPos, y(bar.loss), slot * 0.6, plotBottom() - y(bar.loss),
             PALETTE[i % PALETTE.length]);
    svg.raw(`<text x="${fmt(xPos + slot * 0.3)}" y="${fmt(plotBottom() + 14)}" ` +
            `font-size="9" text-anchor="end" fill="#222" ` +
            `transform="rotate(-35 ${fmt(xPos + slot * 0.3)} ${fmt(plotBottom() + 14)})">` +
            `${bar.label}</text>`);
  });
  return svg.render();
}

/** Goodput summary (box per protocol, optimum line) over the window series. */
export function renderGoodput(inputs: LabeledInput[]): string {
  const series = orderInputs(inputs).map((input) => {
    const table = readCsv(input.path);
    return {
      label: input.label,
      values: numericColumn(table, "bytes_per_s", input.path),
      optimum: numericColumn(table, "optimum", input.path)[0] ?? 0,
      starts: numericColumn(table, "window_start", input.path),
    };
  });
  const yMax = Math.max(...series.flatMap((s) => s.values), ...series.map((s) => s.optimum)) * 1.1;
  const y = linearScale(0, yMax, plotBottom(), MARGIN.top);
  const svg = new Svg();
  svg.title("Goodput summary (boxes) and theoretical optimum (line)");
  svg.axes(linearScale(0, 1, MARGIN.left, plotRight()), y, "", "goodput [B/s]",
           [], ticks(0, yMax));
  const span = plotRight() - MARGIN.left;
  const slot = span / series.length;
  series.forEach((s, i) => {
    const sorted = [...s.values].sort((a, b) => a - b);
    const q = (f: number) => sorted[Math.min(sorted.length - 1, Math.floor(f * sorted.length))];
    const cx = MARGIN.left + i * slot + slot / 2;
    const boxW = slot * 0.5;
    svg.line(cx, y(sorted[0]), cx, y(sorted[sorted.length - 1]), "#555");
    svg.rect(cx - boxW / 2, y(q(0.75)), boxW, y(q(0.25)) - y(q(0.75)),
             PALETTE[i % PALETTE.length], "#333");
    svg.line(cx - boxW / 2, y(q(0.5)), cx + boxW / 2, y(q(0.5)), "#000", 1.5);
    svg.raw(`<text x="${fmt(cx)}" y="${fmt(plotBottom() + 14)}" font-size="9" ` +
            `text-anchor="end" fill="#222" transform="rotate(-35 ${fmt(cx)} ` +
            `${fmt(plotBottom() + 14)})">${s.label}</text>`);
  });
  const optimum = series[0]?.optimum ?? 0;
  svg.line(MARGIN.left, y(optimum), plotRight(), y(optimum), "#d62728", 1.5, "6,3");
  svg.text(plotRight() - 4, y(optimum) - 5, `optimum ${fmt(optimum)} B/s`, 10, "end", "#d62728");
  return svg.render();
}

/** Goodput evolution: one line per protocol over window start times. */
export function renderGoodputSeries(inputs: LabeledInput[]): string {
  const series = orderInputs(inputs).map((input) => {
    const table = readCsv(input.path);
    return {
      label: input.label,
      starts: numericColumn(table, "window_start", input.path).map((us) => us / 1e6),
      values: numericColumn(table, "bytes_per_s", input.path),
      optimum: numericColumn(table, "optimum", input.path)[0] ?? 0,
    };
  });
  const xMax = Math.max(...series.flatMap((s) => s.starts));
  const yMax = Math.max(...series.flatMap((s) => s.values), ...series.map((s) => s.optimum)) * 1.1;
  const x = linearScale(0, xMax, MARGIN.left, plotRight());
  const y = linearScale(0, yMax, plotBottom(), MARGIN.top);
  const svg = new Svg();
  svg.title("Goodput evolution");
  svg.axes(x, y, "time [s]", "goodput [B/s]", ticks(0, xMax), ticks(0, yMax));
  series.forEach((s, i) => {
    svg.polyline(s.starts.map((t, j) => [x(t), y(s.values[j])] as [number, number]),
                 PALETTE[i % PALETTE.length], 1);
  });
  const optimum = series[0]?.optimum ?? 0;
  svg.line(MARGIN.left, y(optimum), plotRight(), y(optimum), "#d62728", 1.5, "6,3");
  svg.legend(series.map((s) => s.label), PALETTE);
  return svg.render();
}

/** Link-stress scatter: traversals vs shortest path, dot area ~ multiplicity. */
export function renderLinkStress(inputs: LabeledInput[]): string {
  const svg = new Svg();
  svg.title("Link traversals vs. shortest path (dot size ~ multiplicity)");
  let xMax = 1;
  let yMax = 1;
  const datasets = orderInputs(inputs).map((input) => {
    const table = readCsv(input.path);
    const traversals = numericColumn(table, "traversals", input.path);
    const shortest = numericColumn(table, "shortest", input.path);
    const multiplicity = numericColumn(table, "multiplicity", input.path);
    xMax = Math.max(xMax, ...shortest);
    yMax = Math.max(yMax, ...traversals);
    return { label: input.label, traversals, shortest, multiplicity };
  });
  yMax = Math.min(yMax, 60); // clip extreme retransmission tails for visibility
  const x = linearScale(0, xMax + 1, MARGIN.left, plotRight());
  const y = linearScale(0, yMax + 1, plotBottom(), MARGIN.top);
  svg.axes(x, y, "shortest path [hops]", "link traversals",
           ticks(0, xMax + 1), ticks(0, yMax + 1));
  svg.line(x(0), y(0), x(Math.min(xMax + 1, yMax + 1)), y(Math.min(xMax + 1, yMax + 1)),
           "#333", 1, "4,3");
  const maxMult = Math.max(1, ...datasets.flatMap((d) => d.multiplicity));
  datasets.forEach((d, i) => {
    d.traversals.forEach((t, j) => {
      if (t > yMax) return;
      const r = 2 + 10 * Math.sqrt(d.multiplicity[j] / maxMult);
      svg.circle(x(d.shortest[j]), y(t), r, PALETTE[i % PALETTE.length], 0.45);
    });
  });
  svg.legend(datasets.map((d) => d.label), PALETTE);
  return svg.render();
}

/** Per-node cumulative energy over time for one protocol. */
export function renderEnergy(inputs: LabeledInput[]): string {
  if (inputs.length !== 1) {
    throw new SchemaError("energy figure expects exactly one energy.csv input");
  }
  const input = inputs[0];
  const table = readCsv(input.path);
  const nodes = numericColumn(table, "node", input.path);
  const starts = numericColumn(table, "window_start", input.path);
  const energy = numericColumn(table, "mj", input.path);
  const byNode = new Map<number, [number, number][]>();
  nodes.forEach((node, i) => {
    if (!byNode.has(node)) byNode.set(node, []);
    byNode.get(node)!.push([starts[i] / 1e6, energy[i]]);
  });
  const xMax = Math.max(...starts) / 1e6;
  const yMax = Math.max(...energy) * 1.05;
  const x = linearScale(0, xMax, MARGIN.left, plotRight());
  const y = linearScale(0, yMax, plotBottom(), MARGIN.top);
  const svg = new Svg();
  svg.title(`Cumulative radio energy per node (${input.label})`);
  svg.axes(x, y, "time [s]", "energy [mJ]", ticks(0, xMax), ticks(0, yMax));
  const nodeIds = [...byNode.keys()].sort((a, b) => a - b);
  nodeIds.forEach((node) => {
    const pts = byNode.get(node)!;
    const color = node === 0 ? "#d62728" : "#7f7f7f";
    svg.polyline(pts.map(([t, e]) => [x(t), y(e)] as [number, number]), color,
                 node === 0 ? 2 : 0.8);
  });
  svg.text(plotRight() - 4, MARGIN.top + 12, "root in red", 10, "end", "#d62728");
  return svg.render();
}

/** Relative control overhead bars (byte and frame ratios). */
export function renderOverheadBars(inputs: LabeledInput[]): string {
  const bars = orderInputs(inputs).map((input) => {
    const table = readCsv(input.path);
    return {
      label: input.label,
      byteRatio: numericColumn(table, "byte_ratio", input.path)[0] ?? 0,
      frameRatio: numericColumn(table, "frame_ratio", input.path)[0] ?? 0,
    };
  });
  const yMax = Math.max(0.5, ...bars.map((b) => Math.max(b.byteRatio, b.frameRatio))) * 1.15;
  const y = linearScale(0, yMax, plotBottom(), MARGIN.top);
  const svg = new Svg();
  svg.title("Relative protocol overhead (control vs. payload)");
  svg.axes(linearScale(0, 1, MARGIN.left, plotRight()), y, "", "overhead ratio",
           [], ticks(0, yMax));
  const span = plotRight() - MARGIN.left;
  const slot = span / bars.length;
  bars.forEach((bar, i) => {
    const xPos = MARGIN.left + i * slot + slot * 0.15;
    const w = slot * 0.3;
    svg.rect(xPos, y(bar.byteRatio), w, plotBottom() - y(bar.byteRatio), PALETTE[0]);
    svg.rect(xPos + w + 2, y(bar.frameRatio), w, plotBottom() - y(bar.frameRatio), PALETTE[1]);
    svg.raw(`<text x="${fmt(xPos + w)}" y="${fmt(plotBottom() + 14)}" font-size="9" ` +
            `text-anchor="end" fill="#222" transform="rotate(-35 ${fmt(xPos + w)} ` +
            `${fmt(plotBottom() + 14)})">${bar.label}</text>`);
  });
  svg.legend(["bytes", "frames"], PALETTE);
  return svg.render();
}

export const RENDERERS: Record<string, (inputs: LabeledInput[], logX?: boolean) => string> = {
  "ttc-cdf": (inputs, logX) => renderTtcCdf(inputs, logX),
  "loss-bars": (inputs) => renderLossBars(inputs),
  "goodput": (inputs) => renderGoodput(inputs),
  "goodput-series": (inputs) => renderGoodputSeries(inputs),
  "linkstress": (inputs) => renderLinkStress(inputs),
  "energy": (inputs) => renderEnergy(inputs),
  "overhead-bars": (inputs) => renderOverheadBars(inputs),
};
