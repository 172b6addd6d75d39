"""Command-line experiment runner: parse configs, execute repetition sweeps,
write traces and metric CSVs, print summaries.

Output layout: <out>/<protocol>/<scenario>/<rep>/{trace.jsonl, *.csv,
topology.json} with manifest.json at the output root.  Repetition seeds are
derived as seed + rep index, so a sweep is reproducible from its manifest.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import metrics
from .scenario import (PROTOCOLS, ConfigError, ScenarioConfig, run_experiment)
from .topology import shortest_hops

PRESET_DIR = Path(__file__).parent / "presets"
PRESET_NAMES = ("single-hop-50ms", "single-hop-5s", "single-hop-unscheduled",
                "multihop-5s", "multihop-15s", "multihop-30s")


def load_scenario(path: str | Path) -> ScenarioConfig:
    with open(path) as fh:
        raw = json.load(fh)
    return ScenarioConfig.from_dict(raw)


def load_preset(name: str) -> ScenarioConfig:
    path = PRESET_DIR / f"{name}.json"
    if not path.exists():
        raise ConfigError(f"unknown preset {name!r}")
    return load_scenario(path)


def execute_run(config: ScenarioConfig, rep: int, out_dir: str,
                write_trace: bool) -> dict:
    """Run one repetition and write its artifacts; returns the summary row."""
    cfg = replace(config, seed=config.seed + rep)
    result = run_experiment(cfg)
    rep_dir = Path(out_dir)
    rep_dir.mkdir(parents=True, exist_ok=True)

    topo = result.topo
    shortest = {p: shortest_hops(topo, p, topo.sink) for p in topo.producers()}
    if cfg.schedule.mode == "periodic":
        interval = cfg.schedule.interval_us
    else:
        interval = (cfg.schedule.lo_us + cfg.schedule.hi_us) // 2
    optimum = metrics.goodput_optimum(len(topo.producers()),
                                      cfg.sizing.payload_bytes, interval)
    bundle = metrics.compute_bundle(
        result.trace.records,
        window_us=cfg.metric.goodput_window_us,
        power_tx_mw=cfg.metric.power_tx_mw,
        power_rx_mw=cfg.metric.power_rx_mw,
        power_idle_mw=cfg.metric.power_idle_mw,
        shortest=shortest,
        optimum=optimum,
        goodput_start=cfg.warmup_us,
        goodput_end=result.t_end,
    )
    metrics.write_csvs(bundle, rep_dir)
    with open(rep_dir / "topology.json", "w") as fh:
        json.dump(result.topology_dump(), fh, indent=1, sort_keys=True)
    if write_trace:
        result.trace.write_jsonl(rep_dir / "trace.jsonl")

    ttcs = sorted(s.ttc_us for s in bundle.ttc_samples)
    gp = [v for _, v in bundle.goodput_series]
    return {
        "protocol": cfg.protocol,
        "scenario": cfg.name,
        "rep": rep,
        "seed": cfg.seed,
        "published": bundle.loss_published,
        "delivered": bundle.loss_delivered,
        "loss_rate": round(bundle.loss_rate, 6),
        "ttc_mean_us": int(sum(ttcs) / len(ttcs)) if ttcs else None,
        "ttc_p50_us": ttcs[len(ttcs) // 2] if ttcs else None,
        "goodput_mean": round(sum(gp) / len(gp), 3) if gp else 0.0,
        "path": str(rep_dir),
    }


def _worker(args) -> dict:
    raw_config, rep, out_dir, write_trace = args
    return execute_run(ScenarioConfig.from_dict(raw_config), rep, out_dir, write_trace)


def run_sweep(config: ScenarioConfig, reps: int, out_root: Path,
              parallel: int = 1, write_trace: bool = False) -> list[dict]:
    jobs = []
    for rep in range(reps):
        rep_dir = out_root / config.protocol / config.name / str(rep)
        jobs.append((config.to_dict(), rep, str(rep_dir), write_trace))
    if parallel > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            return list(pool.map(_worker, jobs))
    return [_worker(job) for job in jobs]


def write_manifest(out_root: Path, configs: list[ScenarioConfig],
                   summaries: list[dict]) -> None:
    manifest = {
        "configs": [
            {"name": c.name, "protocol": c.protocol, "hash": c.config_hash(),
             "seed": c.seed}
            for c in configs
        ],
        "runs": summaries,
    }
    with open(out_root / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)


def _default_out() -> str:
    return os.environ.get("IOT_ARENA_OUT", "out")


def cmd_run(args) -> int:
    config = load_scenario(args.scenario)
    if args.protocol:
        config = replace(config, protocol=args.protocol)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    config.validate()
    out_root = Path(args.out)
    out_root.mkdir(parents=True, exist_ok=True)
    summaries = run_sweep(config, args.reps, out_root, args.parallel, args.trace)
    write_manifest(out_root, [config], summaries)
    for row in summaries:
        print(f"{row['protocol']:14s} {row['scenario']:24s} rep {row['rep']} "
              f"loss {row['loss_rate']:.4f} "
              f"ttc_p50 {row['ttc_p50_us']} us goodput {row['goodput_mean']} B/s")
    return 0


def cmd_matrix(args) -> int:
    if args.preset != "paper":
        print(f"unknown matrix preset {args.preset!r}", file=sys.stderr)
        return 1
    out_root = Path(args.out)
    out_root.mkdir(parents=True, exist_ok=True)
    configs = []
    summaries = []
    for preset_name in PRESET_NAMES:
        base = load_preset(preset_name)
        if args.items:
            base.schedule.items_per_node = args.items
        for proto in PROTOCOLS:
            config = replace(base, protocol=proto)
            config.validate()
            configs.append(config)
            summaries.extend(run_sweep(config, args.reps, out_root,
                                       args.parallel, args.trace))
            row = summaries[-1]
            print(f"{proto:14s} {preset_name:24s} loss {row['loss_rate']:.4f}")
    write_manifest(out_root, configs, summaries)
    return 0


def cmd_summarize(args) -> int:
    manifest_path = Path(args.indir) / "manifest.json"
    if not manifest_path.exists():
        print(f"no manifest at {manifest_path}", file=sys.stderr)
        return 1
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    header = f"{'protocol':14s} {'scenario':24s} {'rep':>3s} {'loss':>8s} " \
             f"{'ttc_p50_us':>11s} {'goodput':>10s}"
    print(header)
    for row in manifest["runs"]:
        print(f"{row['protocol']:14s} {row['scenario']:24s} {row['rep']:3d} "
              f"{row['loss_rate']:8.4f} {str(row['ttc_p50_us']):>11s} "
              f"{row['goodput_mean']:10.3f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iot-arena",
        description="Discrete-event protocol comparison experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario, optionally repeated")
    p_run.add_argument("--scenario", required=True, help="scenario JSON file")
    p_run.add_argument("--protocol", choices=PROTOCOLS, help="override protocol")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--reps", type=int, default=1)
    p_run.add_argument("--out", default=_default_out())
    p_run.add_argument("--parallel", type=int, default=1)
    p_run.add_argument("--trace", action="store_true", help="write trace.jsonl")
    p_run.set_defaults(fn=cmd_run)

    p_matrix = sub.add_parser("matrix", help="run the full protocol/scenario grid")
    p_matrix.add_argument("--preset", default="paper")
    p_matrix.add_argument("--out", default=_default_out())
    p_matrix.add_argument("--reps", type=int, default=1)
    p_matrix.add_argument("--items", type=int, default=20,
                          help="items per node (desk scale default: 20)")
    p_matrix.add_argument("--parallel", type=int, default=1)
    p_matrix.add_argument("--trace", action="store_true")
    p_matrix.set_defaults(fn=cmd_matrix)

    p_sum = sub.add_parser("summarize", help="reprint manifest tables")
    p_sum.add_argument("--in", dest="indir", required=True)
    p_sum.set_defaults(fn=cmd_summarize)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
