"""Timestamped network event records: the sole input of the metrics pipeline."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Optional

# Record kinds
TX = "tx"
RX = "rx"
MAC_DROP = "mac-drop"
L3_DROP = "l3-drop"
PUBLISH = "publish"
DELIVER = "deliver"
EXPIRE = "expire"
STATE_SAMPLE = "state-sample"

# Frame kinds crossing the radio
F_INTEREST = "interest"
F_DATA = "data"
F_PA = "pa"
F_COAP = "coap"
F_MQTTSN = "mqttsn"
F_BEACON = "beacon"
F_MAC_ACK = "mac-ack"


@dataclass(slots=True)
class TraceRecord:
    """One timestamped network event.

    ``item`` is the (producer, seq) content identifier when the event is
    attributable to one content item.  ``deliver`` records carry the matching
    anchor time (``pub_t``): publish time for push/HoPP styles, request time
    for scheduled pull.
    """

    t: int
    node: int
    kind: str
    proto: str = ""
    frame: Optional[str] = None
    item: Optional[tuple[int, int]] = None
    bytes: Optional[int] = None
    app_bytes: Optional[int] = None
    src: Optional[int] = None
    dst: Optional[int] = None
    attempt: Optional[int] = None
    info: Optional[str] = None
    pub_t: Optional[int] = None
    frame_uid: Optional[int] = None
    tx_us: Optional[int] = None
    rx_us: Optional[int] = None

    def to_json(self) -> str:
        """Stable-order JSON with absent fields omitted (byte-reproducible)."""
        out: dict = {"t": self.t, "node": self.node, "kind": self.kind}
        if self.proto:
            out["proto"] = self.proto
        if self.frame is not None:
            out["frame"] = self.frame
        if self.item is not None:
            out["item"] = f"p{self.item[0]}/{self.item[1]}"
        if self.bytes is not None:
            out["bytes"] = self.bytes
        if self.app_bytes is not None:
            out["app_bytes"] = self.app_bytes
        if self.src is not None:
            out["src"] = self.src
        if self.dst is not None:
            out["dst"] = self.dst
        if self.attempt is not None:
            out["attempt"] = self.attempt
        if self.info is not None:
            out["info"] = self.info
        if self.pub_t is not None:
            out["pub_t"] = self.pub_t
        if self.frame_uid is not None:
            out["frame_uid"] = self.frame_uid
        if self.tx_us is not None:
            out["tx_us"] = self.tx_us
        if self.rx_us is not None:
            out["rx_us"] = self.rx_us
        return json.dumps(out, separators=(",", ":"))


class Trace:
    """Append-only event log for one run."""

    def __init__(self, proto: str = ""):
        self.proto = proto
        self.records: list[TraceRecord] = []

    def emit(self, **kw) -> TraceRecord:
        rec = TraceRecord(proto=self.proto, **kw)
        self.records.append(rec)
        return rec

    def __iter__(self):
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def write_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for rec in self.records:
                fh.write(rec.to_json())
                fh.write("\n")


def read_jsonl(path) -> list[TraceRecord]:
    """Load records written by :meth:`Trace.write_jsonl`."""
    out: list[TraceRecord] = []
    with open(path) as fh:
        for line in fh:
            raw = json.loads(line)
            item = raw.get("item")
            if item is not None:
                producer, seq = item[1:].split("/")
                raw["item"] = (int(producer), int(seq))
            out.append(TraceRecord(**{k: raw.get(k) for k in (
                "t", "node", "kind", "proto", "frame", "item", "bytes", "app_bytes",
                "src", "dst", "attempt", "info", "pub_t", "frame_uid", "tx_us", "rx_us",
            ) if k in raw}))
    return out


def records_of_kind(records: Iterable[TraceRecord], kind: str) -> list[TraceRecord]:
    return [r for r in records if r.kind == kind]
