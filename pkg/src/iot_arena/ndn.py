"""Per-node NDN data plane: PIT, FIB, Content Store, Interest/Data processing,
per-hop retransmission, and PIT overflow policies.

Names are (prefix, seq) pairs where the prefix identifies one producer.  Hop
retransmission of a pending Interest runs at a 2 s period, at most 4 times,
and is armed either unconditionally on each send ("timer" mode) or only after
link-layer failure feedback ("feedback" mode); the scenario selects the mode.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass
from typing import Callable, Optional

from . import trace as tr
from .kernel import Kernel, SEC
from .phymac import Frame, MacOutcome, Radio
from .topology import DEFAULT_PREFIX

LOCAL_FACE = -2

# Wire sizing: 24 B name prefix + 4 B seq + 8 B fixed TLV scaffolding;
# Data adds payload + 4 B.  No header compression.
NAME_BYTES = 24
SEQ_BYTES = 4
TLV_BYTES = 8
DATA_EXTRA_BYTES = 4

Name = tuple[int, int]


def interest_bytes(payload_bytes: int = 0) -> int:
    return NAME_BYTES + SEQ_BYTES + TLV_BYTES + payload_bytes


def data_bytes(payload_bytes: int) -> int:
    return NAME_BYTES + SEQ_BYTES + TLV_BYTES + DATA_EXTRA_BYTES + payload_bytes


@dataclass(slots=True)
class Interest:
    name: Name
    lifetime_us: int = 10 * SEC
    payload_bytes: int = 0  # non-zero only for Interest Notifications


@dataclass(slots=True)
class DataMsg:
    name: Name
    payload_bytes: int
    is_ack: bool = False  # empty-ack marker (Interest Notification reply)


@dataclass(slots=True)
class NdnConfig:
    pit_capacity: int = 16
    pit_policy: str = "drop-new"  # or "overwrite-oldest"
    cs_capacity_bytes: int = 10240
    retx_period_us: int = 2 * SEC
    retx_max: int = 4
    lifetime_us: int = 10 * SEC
    retx_mode: str = "timer"  # or "feedback"
    proc_delay_us: int = 1500
    cache_data: bool = True  # I-Not runs without caching


class PitEntry:
    __slots__ = ("name", "in_faces", "out_face", "created", "expiry_handle",
                 "retx_handle", "retx_count", "last_send", "payload_bytes")

    def __init__(self, name: Name, out_face: int, created: int):
        self.name = name
        self.in_faces: list[int] = []
        self.out_face = out_face
        self.created = created
        self.expiry_handle = None
        self.retx_handle = None
        self.retx_count = 0
        self.last_send = created
        self.payload_bytes = 0


class ContentStore:
    """Exact-name cache with LRU replacement under a byte budget."""

    def __init__(self, capacity_bytes: int):
        self.capacity_bytes = capacity_bytes
        self.stored: OrderedDict[Name, int] = OrderedDict()
        self.used_bytes = 0

    def insert(self, name: Name, payload_bytes: int) -> None:
        if payload_bytes > self.capacity_bytes:
            raise ValueError(f"payload of {payload_bytes} B exceeds content store")
        if name in self.stored:
            self.used_bytes -= self.stored.pop(name)
        while self.used_bytes + payload_bytes > self.capacity_bytes:
            _, evicted = self.stored.popitem(last=False)
            self.used_bytes -= evicted
        self.stored[name] = payload_bytes
        self.used_bytes += payload_bytes

    def lookup(self, name: Name) -> Optional[int]:
        size = self.stored.get(name)
        if size is not None:
            self.stored.move_to_end(name)
        return size


class NdnForwarder:
    """One node's NDN engine; the application is attached as the LOCAL face."""

    def __init__(self, kernel: Kernel, radio: Radio, node: int, trace: tr.Trace,
                 config: NdnConfig, proto: str):
        self.kernel = kernel
        self.radio = radio
        self.node = node
        self.trace = trace
        self.cfg = config
        self.proto = proto
        self.fib: dict[int, int] = {}
        self.pit: OrderedDict[Name, PitEntry] = OrderedDict()
        self.cs = ContentStore(config.cs_capacity_bytes)
        # application hooks
        self.on_local_data: Callable[[DataMsg], None] | None = None
        self.on_local_interest: Callable[[Interest, int], None] | None = None
        self.on_local_expire: Callable[[Name], None] | None = None
        self.on_interest_seen: Callable[[Name, int], None] | None = None
        self.on_data_sent: Callable[[Name, int, bool], None] | None = None
        self.on_unsolicited_data: Callable[[int, DataMsg], bool] | None = None

    # -- helpers ----------------------------------------------------------

    def _lpm(self, name: Name) -> Optional[int]:
        face = self.fib.get(name[0])
        if face is None:
            face = self.fib.get(DEFAULT_PREFIX)
        return face

    def _send_interest(self, entry: PitEntry, interest: Interest) -> None:
        entry.last_send = self.kernel.now
        frame = Frame(src=self.node, dst=entry.out_face, kind=tr.F_INTEREST,
                      bytes=interest_bytes(interest.payload_bytes),
                      app_bytes=interest.payload_bytes, item=interest.name,
                      msg=interest)
        self.radio.unicast(frame, lambda out, e=entry, i=interest: self._interest_mac_done(e, i, out))
        if self.cfg.retx_mode == "timer":
            self._arm_retx(entry, interest)

    def _interest_mac_done(self, entry: PitEntry, interest: Interest, out: MacOutcome) -> None:
        if self.pit.get(interest.name) is not entry:
            return
        if not out.delivered and self.cfg.retx_mode == "feedback":
            self._arm_retx(entry, interest)

    def _arm_retx(self, entry: PitEntry, interest: Interest) -> None:
        if entry.retx_handle is not None:
            self.kernel.cancel(entry.retx_handle)
        fire_at = entry.last_send + self.cfg.retx_period_us
        entry.retx_handle = self.kernel.schedule_at(
            max(fire_at, self.kernel.now),
            lambda: self.hop_retransmit(entry, interest))

    def hop_retransmit(self, entry: PitEntry, interest: Interest) -> None:
        """Re-send a pending Interest on its out face, at most retx_max times."""
        if self.pit.get(interest.name) is not entry:
            return
        if entry.retx_count >= self.cfg.retx_max:
            return  # budget exhausted; the entry is left to expire
        entry.retx_count += 1
        self._send_interest(entry, interest)

    def _erase(self, entry: PitEntry) -> None:
        self.pit.pop(entry.name, None)
        if entry.expiry_handle is not None:
            self.kernel.cancel(entry.expiry_handle)
        if entry.retx_handle is not None:
            self.kernel.cancel(entry.retx_handle)

    def _expire(self, entry: PitEntry) -> None:
        if self.pit.get(entry.name) is not entry:
            return
        had_local = LOCAL_FACE in entry.in_faces
        self.trace.emit(t=self.kernel.now, node=self.node, kind=tr.EXPIRE,
                        frame=tr.F_INTEREST, item=entry.name, info="pit-expire")
        self._erase(entry)
        if had_local and self.on_local_expire is not None:
            self.on_local_expire(entry.name)

    def _insert_pit(self, interest: Interest, in_face: int, out_face: int) -> Optional[PitEntry]:
        if len(self.pit) >= self.cfg.pit_capacity:
            if self.cfg.pit_policy == "drop-new":
                self.trace.emit(t=self.kernel.now, node=self.node, kind=tr.L3_DROP,
                                frame=tr.F_INTEREST, item=interest.name, info="pit-drop")
                return None
            oldest = next(iter(self.pit.values()))
            self.trace.emit(t=self.kernel.now, node=self.node, kind=tr.L3_DROP,
                            frame=tr.F_INTEREST, item=oldest.name, info="pit-overwrite")
            self._erase(oldest)
        entry = PitEntry(interest.name, out_face, self.kernel.now)
        entry.in_faces.append(in_face)
        entry.payload_bytes = interest.payload_bytes
        self.pit[interest.name] = entry
        entry.expiry_handle = self.kernel.schedule(
            interest.lifetime_us, lambda: self._expire(entry))
        assert len(self.pit) <= self.cfg.pit_capacity
        return entry

    def _send_data(self, face: int, data: DataMsg) -> None:
        if face == LOCAL_FACE:
            if self.on_local_data is not None:
                self.on_local_data(data)
            return
        frame = Frame(src=self.node, dst=face, kind=tr.F_DATA,
                      bytes=data_bytes(data.payload_bytes),
                      app_bytes=data.payload_bytes, item=data.name, msg=data)
        self.radio.unicast(frame, lambda out, n=data.name, f=face: self._data_mac_done(n, f, out))

    def _data_mac_done(self, name: Name, face: int, out: MacOutcome) -> None:
        if self.on_data_sent is not None:
            self.on_data_sent(name, face, out.delivered)

    # -- the two pipeline halves -------------------------------------------

    def on_interest(self, face: int, interest: Interest) -> None:
        """Interest pipeline: Content Store, then PIT aggregation, then FIB."""
        name = interest.name
        if self.on_interest_seen is not None:
            self.on_interest_seen(name, face)
        cached = self.cs.lookup(name)
        if cached is not None:
            self.trace.emit(t=self.kernel.now, node=self.node, kind=tr.RX,
                            frame=tr.F_INTEREST, item=name, info="cs-hit")
            self._send_data(face, DataMsg(name, cached))
            return
        entry = self.pit.get(name)
        if entry is not None:
            if face not in entry.in_faces:
                entry.in_faces.append(face)
            return
        out_face = self._lpm(name)
        if out_face is None:
            self.trace.emit(t=self.kernel.now, node=self.node, kind=tr.L3_DROP,
                            frame=tr.F_INTEREST, item=name, info="no-route")
            return
        entry = self._insert_pit(interest, face, out_face)
        if entry is None:
            return
        if out_face == LOCAL_FACE:
            if self.on_local_interest is not None:
                self.on_local_interest(interest, face)
            return
        self._send_interest(entry, interest)

    def express_interest(self, interest: Interest, out_face: int | None = None,
                         skip_cs: bool = False) -> bool:
        """Application-originated Interest (LOCAL in-face).

        ``out_face`` overrides the FIB lookup (used by HoPP to pull directly
        from an advertising neighbor); ``skip_cs`` forces a fresh network
        fetch even when the item is cached.  Returns False if no forwarding
        state could be created.
        """
        name = interest.name
        if not skip_cs:
            cached = self.cs.lookup(name)
            if cached is not None:
                if self.on_local_data is not None:
                    self.on_local_data(DataMsg(name, cached))
                return True
        entry = self.pit.get(name)
        if entry is not None:
            if LOCAL_FACE not in entry.in_faces:
                entry.in_faces.append(LOCAL_FACE)
            return True
        face = out_face if out_face is not None else self._lpm(name)
        if face is None:
            self.trace.emit(t=self.kernel.now, node=self.node, kind=tr.L3_DROP,
                            frame=tr.F_INTEREST, item=name, info="no-route")
            return False
        entry = self._insert_pit(interest, LOCAL_FACE, face)
        if entry is None:
            return False
        if face == LOCAL_FACE:
            if self.on_local_interest is not None:
                self.on_local_interest(interest, LOCAL_FACE)
            return True
        self._send_interest(entry, interest)
        return True

    def on_data(self, face: int, data: DataMsg) -> None:
        """Data pipeline: match PIT, cache, fan out to requesting faces."""
        entry = self.pit.get(data.name)
        if entry is None:
            if self.on_unsolicited_data is not None \
                    and self.on_unsolicited_data(face, data):
                return
            self.trace.emit(t=self.kernel.now, node=self.node, kind=tr.L3_DROP,
                            frame=tr.F_DATA, item=data.name, info="unsolicited")
            return
        self._erase(entry)
        if self.cfg.cache_data and not data.is_ack:
            self.cs.insert(data.name, data.payload_bytes)
        for in_face in entry.in_faces:
            self._send_data(in_face, data)

    def drop_entry(self, name: Name) -> None:
        """Abandon a pending entry (application-driven re-request path)."""
        entry = self.pit.get(name)
        if entry is not None:
            self._erase(entry)

    def publish(self, name: Name, payload_bytes: int) -> None:
        """Producer-side injection: cache the item and satisfy pending state."""
        if self.cfg.cache_data:
            self.cs.insert(name, payload_bytes)
        entry = self.pit.get(name)
        if entry is not None:
            self._erase(entry)
            for in_face in entry.in_faces:
                self._send_data(in_face, DataMsg(name, payload_bytes))

    def pit_occupancy(self) -> int:
        return len(self.pit)
