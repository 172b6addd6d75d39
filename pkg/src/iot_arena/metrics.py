"""Compute loss, time-to-content, goodput, link stress, energy, and control
overhead from trace records, and write them as stable CSV schemas.

Column schemas (all times in integer microseconds unless suffixed otherwise):

ttc.csv        item_id,producer,publish_t,deliver_t,ttc_us
loss.csv       published,delivered,lost,loss_rate
goodput.csv    window_start,bytes_per_s,optimum
linkstress.csv traversals,shortest,multiplicity
energy.csv     node,window_start,mj  (cumulative per node)
overhead.csv   control_bytes,payload_bytes,byte_ratio,control_frames,payload_frames,frame_ratio
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Optional

from . import trace as tr


class MetricsError(ValueError):
    pass


@dataclass
class TtcSample:
    item: tuple[int, int]
    producer: int
    anchor_t: int
    deliver_t: int

    @property
    def ttc_us(self) -> int:
        return self.deliver_t - self.anchor_t


@dataclass
class MetricBundle:
    loss_published: int = 0
    loss_delivered: int = 0
    loss_rate: float = 0.0
    ttc_samples: list[TtcSample] = field(default_factory=list)
    goodput_series: list[tuple[int, float]] = field(default_factory=list)
    goodput_optimum: float = 0.0
    link_stress: list[tuple[int, int, int]] = field(default_factory=list)
    energy_series: dict[int, list[tuple[int, float]]] = field(default_factory=dict)
    control_bytes: int = 0
    payload_bytes: int = 0
    control_frames: int = 0
    payload_frames: int = 0

    @property
    def byte_overhead_ratio(self) -> float:
        return self.control_bytes / self.payload_bytes if self.payload_bytes else 0.0

    @property
    def frame_overhead_ratio(self) -> float:
        return self.control_frames / self.payload_frames if self.payload_frames else 0.0


def loss_rate(records: Iterable[tr.TraceRecord]) -> tuple[float, int, int]:
    """(loss, published, delivered); duplicates count once by item id."""
    published: set = set()
    delivered: set = set()
    for rec in records:
        if rec.kind == tr.PUBLISH:
            published.add(rec.item)
        elif rec.kind == tr.DELIVER:
            delivered.add(rec.item)
    if not published:
        raise MetricsError("no published items in trace")
    return 1.0 - len(delivered & published) / len(published), \
        len(published), len(delivered & published)


def ttc(records: Iterable[tr.TraceRecord]) -> list[TtcSample]:
    """Per delivered item: arrival minus its anchor (publish or request time)."""
    out = []
    for rec in records:
        if rec.kind == tr.DELIVER and rec.item is not None:
            out.append(TtcSample(item=rec.item, producer=rec.item[0],
                                 anchor_t=rec.pub_t or 0, deliver_t=rec.t))
    out.sort(key=lambda s: (s.deliver_t, s.item))
    return out


def ttc_cdf(samples: list[TtcSample]) -> list[tuple[int, float]]:
    """Sorted (ttc_us, cumulative fraction) pairs."""
    if not samples:
        return []
    values = sorted(s.ttc_us for s in samples)
    n = len(values)
    return [(v, (i + 1) / n) for i, v in enumerate(values)]


def quantile(sorted_values: list, q: float):
    if not sorted_values:
        raise MetricsError("empty sample set")
    idx = min(len(sorted_values) - 1, int(q * len(sorted_values)))
    return sorted_values[idx]


def goodput(records: Iterable[tr.TraceRecord], window_us: int,
            t_start: int = 0, t_end: Optional[int] = None) -> list[tuple[int, float]]:
    """Unique delivered application bytes per second, per window."""
    if window_us <= 0:
        raise MetricsError("window must be positive")
    deliveries = [(r.t, r.app_bytes or 0) for r in records if r.kind == tr.DELIVER]
    if t_end is None:
        t_end = max((t for t, _ in deliveries), default=t_start) + window_us
    n_windows = max(0, -(-(t_end - t_start) // window_us))
    buckets = [0] * n_windows
    for t, b in deliveries:
        w = (t - t_start) // window_us
        if 0 <= w < n_windows:
            buckets[w] += b
    scale = window_us / 1_000_000
    return [(t_start + i * window_us, buckets[i] / scale) for i in range(n_windows)]


def goodput_optimum(n_producers: int, payload_bytes: int, interval_us: int) -> float:
    """Theoretical optimum in bytes per second."""
    return n_producers * payload_bytes / (interval_us / 1_000_000)


def link_stress(records: Iterable[tr.TraceRecord],
                shortest: dict[int, int]) -> list[tuple[int, int, int]]:
    """Multiset of (payload-frame traversals, shortest hops) per item.

    A traversal is one transmission attempt of a payload-bearing frame
    (retransmissions included; MAC acks and protocol acks carry no payload and
    are excluded).  Failed items appear with the traversals they achieved.
    """
    traversals: dict[tuple[int, int], int] = {}
    published: set = set()
    for rec in records:
        if rec.kind == tr.PUBLISH:
            published.add(rec.item)
            traversals.setdefault(rec.item, 0)
        elif rec.kind == tr.TX and rec.item is not None and (rec.app_bytes or 0) > 0:
            traversals[rec.item] = traversals.get(rec.item, 0) + 1
    counts: dict[tuple[int, int], int] = {}
    for item, n_tx in traversals.items():
        if item not in published:
            continue
        key = (n_tx, shortest.get(item[0], 0))
        counts[key] = counts.get(key, 0) + 1
    return sorted((t, s, m) for (t, s), m in counts.items())


def energy(records: Iterable[tr.TraceRecord], power_tx_mw: float,
           power_rx_mw: float, power_idle_mw: float) -> dict[int, list[tuple[int, float]]]:
    """Cumulative per-node energy (mJ) at each state-sample instant.

    Samples carry cumulative tx/rx radio time; idle fills the remainder of
    elapsed time, so per-node state durations always conserve.
    """
    series: dict[int, list[tuple[int, float]]] = {}
    for rec in records:
        if rec.kind != tr.STATE_SAMPLE:
            continue
        tx_s = (rec.tx_us or 0) / 1_000_000
        rx_s = (rec.rx_us or 0) / 1_000_000
        idle_s = rec.t / 1_000_000 - tx_s - rx_s
        mj = power_tx_mw * tx_s + power_rx_mw * rx_s + power_idle_mw * idle_s
        series.setdefault(rec.node, []).append((rec.t, mj))
    return {n: sorted(v) for n, v in sorted(series.items())}


def control_overhead(records: Iterable[tr.TraceRecord]) -> tuple[int, int, int, int]:
    """(control_bytes, payload_bytes, control_frames, payload_frames).

    Control traffic is every transmitted frame that carries no application
    payload (requests, acks, beacons, MAC acks); the denominator is the
    application payload carried by payload-bearing transmissions.
    """
    control_bytes = payload_bytes = control_frames = payload_frames = 0
    for rec in records:
        if rec.kind != tr.TX:
            continue
        if (rec.app_bytes or 0) > 0:
            payload_frames += 1
            payload_bytes += rec.app_bytes
        else:
            control_frames += 1
            control_bytes += rec.bytes or 0
    return control_bytes, payload_bytes, control_frames, payload_frames


def compute_bundle(records: list[tr.TraceRecord], *, window_us: int,
                   power_tx_mw: float, power_rx_mw: float, power_idle_mw: float,
                   shortest: dict[int, int], optimum: float,
                   goodput_start: int = 0, goodput_end: Optional[int] = None) -> MetricBundle:
    bundle = MetricBundle()
    loss, published, delivered = loss_rate(records)
    bundle.loss_rate = loss
    bundle.loss_published = published
    bundle.loss_delivered = delivered
    bundle.ttc_samples = ttc(records)
    bundle.goodput_series = goodput(records, window_us, goodput_start, goodput_end)
    bundle.goodput_optimum = optimum
    bundle.link_stress = link_stress(records, shortest)
    bundle.energy_series = energy(records, power_tx_mw, power_rx_mw, power_idle_mw)
    (bundle.control_bytes, bundle.payload_bytes,
     bundle.control_frames, bundle.payload_frames) = control_overhead(records)
    return bundle


# -- CSV output --------------------------------------------------------------

def write_csvs(bundle: MetricBundle, outdir) -> None:
    _write(outdir / "ttc.csv",
           ["item_id", "producer", "publish_t", "deliver_t", "ttc_us"],
           [(f"p{s.item[0]}/{s.item[1]}", s.producer, s.anchor_t, s.deliver_t,
             s.ttc_us) for s in bundle.ttc_samples])
    _write(outdir / "loss.csv",
           ["published", "delivered", "lost", "loss_rate"],
           [(bundle.loss_published, bundle.loss_delivered,
             bundle.loss_published - bundle.loss_delivered,
             f"{bundle.loss_rate:.6f}")])
    _write(outdir / "goodput.csv",
           ["window_start", "bytes_per_s", "optimum"],
           [(w, f"{v:.3f}", f"{bundle.goodput_optimum:.3f}")
            for w, v in bundle.goodput_series])
    _write(outdir / "linkstress.csv",
           ["traversals", "shortest", "multiplicity"],
           bundle.link_stress)
    energy_rows = []
    for node, series in bundle.energy_series.items():
        for t, mj in series:
            energy_rows.append((node, t, f"{mj:.6f}"))
    _write(outdir / "energy.csv", ["node", "window_start", "mj"], energy_rows)
    _write(outdir / "overhead.csv",
           ["control_bytes", "payload_bytes", "byte_ratio",
            "control_frames", "payload_frames", "frame_ratio"],
           [(bundle.control_bytes, bundle.payload_bytes,
             f"{bundle.byte_overhead_ratio:.6f}",
             bundle.control_frames, bundle.payload_frames,
             f"{bundle.frame_overhead_ratio:.6f}")])


def _write(path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
