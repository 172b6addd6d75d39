#!/usr/bin/env node
/**
 * figures <kind> --in label=path [label=path ...] --out <svg> [--log]
 * figures paper-suite --in <matrix-dir> --out <dir>
 *
 * paper-suite walks a matrix output directory
 * (<dir>/<protocol>/<scenario>/<rep>/*.csv) and renders the full figure set.
 */

import { existsSync, mkdirSync, readdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { SchemaError } from "./csv.js";
import { LabeledInput, PROTOCOL_ORDER, RENDERERS } from "./figures.js";

function parseArgs(argv: string[]) {
  const [kind, ...rest] = argv;
  const inputs: string[] = [];
  let out = "";
  let logX = false;
  for (let i = 0; i < rest.length; i++) {
    const arg = rest[i];
    if (arg === "--in") {
      while (i + 1 < rest.length && !rest[i + 1].startsWith("--")) {
        inputs.push(rest[++i]);
      }
    } else if (arg === "--out") {
      out = rest[++i];
    } else if (arg === "--log") {
      logX = true;
    } else {
      throw new Error(`unknown argument ${arg}`);
    }
  }
  return { kind, inputs, out, logX };
}

function toLabeled(raw: string[]): LabeledInput[] {
  return raw.map((spec) => {
    const eq = spec.indexOf("=");
    if (eq > 0) {
      return { label: spec.slice(0, eq), path: spec.slice(eq + 1) };
    }
    return { label: spec, path: spec };
  });
}

interface MatrixLayout {
  root: string;
  protocols: string[];
  scenarios: string[];
}

function scanMatrix(root: string): MatrixLayout {
  const protocols = readdirSync(root, { withFileTypes: true })
    .filter((e) => e.isDirectory())
    .map((e) => e.name)
    .sort((a, b) => PROTOCOL_ORDER.indexOf(a) - PROTOCOL_ORDER.indexOf(b));
  if (protocols.length === 0) {
    throw new SchemaError(`${root}: no protocol directories`);
  }
  const scenarios = [...new Set(protocols.flatMap((p) =>
    readdirSync(join(root, p), { withFileTypes: true })
      .filter((e) => e.isDirectory())
      .map((e) => e.name)))].sort();
  return { root, protocols, scenarios };
}

function csvInputs(layout: MatrixLayout, scenario: string, file: string): LabeledInput[] {
  const inputs: LabeledInput[] = [];
  for (const proto of layout.protocols) {
    const path = join(layout.root, proto, scenario, "0", file);
    if (existsSync(path)) {
      inputs.push({ label: proto, path });
    }
  }
  if (inputs.length === 0) {
    throw new SchemaError(`no ${file} found for scenario ${scenario}`);
  }
  return inputs;
}

function paperSuite(matrixDir: string, outDir: string): string[] {
  const layout = scanMatrix(matrixDir);
  mkdirSync(outDir, { recursive: true });
  const written: string[] = [];
  const emit = (name: string, svg: string) => {
    const path = join(outDir, name);
    writeFileSync(path, svg);
    written.push(path);
  };

  emit("fig3-overhead.svg",
       RENDERERS["overhead-bars"](csvInputs(layout, "single-hop-5s", "overhead.csv")));
  emit("fig6-loss.svg",
       RENDERERS["loss-bars"](csvInputs(layout, "single-hop-50ms", "loss.csv")));
  emit("fig7-ttc-singlehop.svg",
       RENDERERS["ttc-cdf"](csvInputs(layout, "single-hop-5s", "ttc.csv"), true));
  emit("fig9-ttc-multihop.svg",
       RENDERERS["ttc-cdf"](csvInputs(layout, "multihop-5s", "ttc.csv"), true));
  emit("fig10-goodput.svg",
       RENDERERS["goodput"](csvInputs(layout, "multihop-15s", "goodput.csv")));
  emit("fig11-goodput-series.svg",
       RENDERERS["goodput-series"](csvInputs(layout, "multihop-15s", "goodput.csv")));
  emit("fig12-linkstress.svg",
       RENDERERS["linkstress"](csvInputs(layout, "multihop-15s", "linkstress.csv")));
  for (const input of csvInputs(layout, "multihop-15s", "energy.csv")) {
    emit(`fig13-energy-${input.label}.svg`, RENDERERS["energy"]([input]));
  }
  return written;
}

export function main(argv: string[]): number {
  try {
    const { kind, inputs, out, logX } = parseArgs(argv);
    if (!kind) {
      console.error("usage: figures <kind|paper-suite> --in ... --out ...");
      return 1;
    }
    if (kind === "paper-suite") {
      const files = paperSuite(inputs[0], out);
      console.log(`wrote ${files.length} figures to ${out}`);
      return 0;
    }
    const renderer = RENDERERS[kind];
    if (!renderer) {
      console.error(`unknown figure kind '${kind}' ` +
        `(have: ${Object.keys(RENDERERS).join(", ")}, paper-suite)`);
      return 1;
    }
    const svg = renderer(toLabeled(inputs), logX);
    writeFileSync(out, svg);
    console.log(`wrote ${out}`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema error: ${err.message}`);
      return 1;
    }
    console.error(String(err));
    return 2;
  }
}

const invokedDirectly = process.argv[1]?.endsWith("cli.js");
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
