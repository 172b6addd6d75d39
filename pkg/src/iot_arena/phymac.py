"""IEEE 802.15.4-like radio: frame airtime at 250 kb/s, per-link stochastic loss,
MAC acknowledgment with fast retries, broadcast, and radio-state accounting.

Loss is a per-directed-link Bernoulli draw per transmission attempt; MAC acks
are 11-byte frames subject to the reverse link's loss.  Interference is folded
into the per-link delivery probability (optionally time-varying through
degradation episodes); there is no carrier sensing or collision model.  Each
node transmits one frame at a time; reception is not blocked by transmission.
"""

from __future__ import annotations

import bisect
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import trace as tr
from .kernel import Kernel

PHY_OVERHEAD_BYTES = 6  # preamble 4, SFD 1, PHR 1
MTU_BYTES = 127
BYTE_AIRTIME_US = 32  # 8 bits / 250 kb/s
MAC_ACK_BYTES = 11

BROADCAST = -1


class FrameError(ValueError):
    """Frame violates the link-layer contract (size, addressing)."""


def airtime_us(frame_bytes: int, phy_overhead: int = PHY_OVERHEAD_BYTES) -> int:
    """Air occupancy of one frame in microseconds at 250 kb/s."""
    if frame_bytes <= 0:
        raise FrameError(f"frame of {frame_bytes} bytes")
    if frame_bytes > MTU_BYTES:
        raise FrameError(f"frame of {frame_bytes} bytes exceeds {MTU_BYTES} B MTU")
    return (phy_overhead + frame_bytes) * BYTE_AIRTIME_US


@dataclass(slots=True)
class Frame:
    """The unit crossing the radio: addressed byte payload with a protocol tag."""

    src: int
    dst: int  # node id or BROADCAST
    kind: str  # interest | data | pa | coap | mqttsn | beacon
    bytes: int  # link-layer frame size
    app_bytes: int = 0  # application payload bytes inside
    item: Optional[tuple[int, int]] = None
    msg: object = None  # opaque L3 payload, handed to the receiver stack
    uid: int = 0

    def __post_init__(self):
        if self.bytes > MTU_BYTES:
            raise FrameError(f"frame of {self.bytes} bytes exceeds MTU")
        if self.app_bytes > self.bytes:
            raise FrameError("app_bytes exceeds frame bytes")


@dataclass(slots=True)
class MacConfig:
    """Link-layer ARQ parameters.

    Defaults keep each repeat cycle (airtime + ack wait + backoff) under the
    10 ms fast-repeat bound for MTU-sized frames.
    """

    max_frame_retries: int = 3
    ack_timeout_us: int = 900
    backoff_lo_us: int = 300
    backoff_hi_us: int = 2000
    phy_overhead_bytes: int = PHY_OVERHEAD_BYTES


@dataclass(slots=True)
class MacOutcome:
    delivered: bool
    attempts: int
    t_end: int


@dataclass(slots=True)
class Link:
    """Directed link with baseline delivery probability and degradation episodes.

    ``episodes`` is a sorted list of (start_us, end_us) during which the
    delivery probability is multiplied by ``episode_factor``.
    """

    p: float
    episodes: list[tuple[int, int]] = field(default_factory=list)
    episode_factor: float = 1.0
    _starts: list[int] = field(default_factory=list)

    def finalize(self) -> None:
        self._starts = [s for s, _ in self.episodes]

    def p_at(self, t: int) -> float:
        if not self.episodes:
            return self.p
        i = bisect.bisect_right(self._starts, t) - 1
        if i >= 0 and t < self.episodes[i][1]:
            return self.p * self.episode_factor
        return self.p


class Radio:
    """Shared radio medium for one run: links, MAC ARQ, state accounting.

    With ``interference_beta`` > 0, each attempt's delivery probability is
    additionally scaled by (1 - beta * U) where U is the fraction of recent
    airtime across the network: the self-induced interference of concurrent
    and retransmitted traffic, folded into per-link loss instead of an
    explicit collision model.
    """

    def __init__(self, kernel: Kernel, trace: tr.Trace, mac: MacConfig | None = None,
                 interference_beta: float = 0.0, util_window_us: int = 150_000):
        self.kernel = kernel
        self.trace = trace
        self.mac = mac or MacConfig()
        self.interference_beta = interference_beta
        self.util_window_us = util_window_us
        self.links: dict[tuple[int, int], Link] = {}
        self.neighbors: dict[int, list[int]] = {}
        # L3 receive hooks: node -> fn(frame, from_node)
        self.receivers: dict[int, Callable[[Frame, int], None]] = {}
        # per-node radio activity: list of (start_us, dur_us, 'tx'|'rx')
        self.activity: dict[int, list[tuple[int, int, str]]] = {}
        # cumulative per-node tx/rx microseconds
        self.tx_us: dict[int, int] = {}
        self.rx_us: dict[int, int] = {}
        # exponentially-weighted MAC exchange success toward each neighbor
        self.ewma_success: dict[tuple[int, int], float] = {}
        self._tx_queue: dict[int, deque] = {}
        self._tx_busy: dict[int, bool] = {}
        self._frame_uid = 0
        self._air: deque = deque()  # (start_us, dur_us) of recent transmissions
        self._air_sum = 0

    # -- recent channel utilization ----------------------------------------

    def _note_air(self, start: int, dur: int) -> None:
        if self.interference_beta <= 0.0:
            return
        self._air.append((start, dur))
        self._air_sum += dur

    def utilization(self, t: int) -> float:
        """Fraction of the trailing window occupied by transmissions."""
        window = self.util_window_us
        air = self._air
        while air and air[0][0] < t - window:
            self._air_sum -= air.popleft()[1]
        return min(1.0, self._air_sum / window)

    def _delivery_scale(self, t: int) -> float:
        if self.interference_beta <= 0.0:
            return 1.0
        return max(0.0, 1.0 - self.interference_beta * self.utilization(t))

    # -- construction -----------------------------------------------------

    def add_node(self, node: int) -> None:
        if node in self.activity:
            return
        self.activity[node] = []
        self.tx_us[node] = 0
        self.rx_us[node] = 0
        self.neighbors.setdefault(node, [])
        self._tx_queue[node] = deque()
        self._tx_busy[node] = False

    def add_link(self, u: int, v: int, p: float,
                 episodes: list[tuple[int, int]] | None = None,
                 episode_factor: float = 1.0) -> None:
        self.add_node(u)
        self.add_node(v)
        link = Link(p=p, episodes=episodes or [], episode_factor=episode_factor)
        link.finalize()
        self.links[(u, v)] = link
        if v not in self.neighbors[u]:
            self.neighbors[u].append(v)
            self.neighbors[u].sort()

    def attach(self, node: int, on_frame: Callable[[Frame, int], None]) -> None:
        self.receivers[node] = on_frame

    # -- state accounting -------------------------------------------------

    def _log_active(self, node: int, start: int, dur: int, state: str) -> None:
        self.activity[node].append((start, dur, state))
        if state == "tx":
            self.tx_us[node] += dur
        else:
            self.rx_us[node] += dur

    def sample_states(self) -> None:
        """Record a cumulative (tx, rx) snapshot per node as state-sample records."""
        t = self.kernel.now
        for node in sorted(self.activity):
            self.trace.emit(t=t, node=node, kind=tr.STATE_SAMPLE,
                            tx_us=self.tx_us[node], rx_us=self.rx_us[node])

    def energy_durations(self, node: int, window_us: int,
                         t_end: int | None = None) -> list[tuple[int, int, int, int]]:
        """Per-window (window_start, tx, rx, idle) durations covering the run.

        idle = window - tx - rx; activity spanning a window boundary is split
        proportionally.
        """
        if window_us <= 0:
            raise ValueError("window must be positive")
        end = t_end if t_end is not None else self.kernel.now
        n_windows = max(1, -(-end // window_us))
        tx = [0] * n_windows
        rx = [0] * n_windows
        for start, dur, state in self.activity[node]:
            acc = tx if state == "tx" else rx
            remaining = dur
            t = start
            while remaining > 0:
                w = t // window_us
                if w >= n_windows:
                    break
                room = (w + 1) * window_us - t
                chunk = min(room, remaining)
                acc[w] += chunk
                t += chunk
                remaining -= chunk
        out = []
        for w in range(n_windows):
            span = min(window_us, end - w * window_us)
            out.append((w * window_us, tx[w], rx[w], span - tx[w] - rx[w]))
        return out

    # -- transmission -----------------------------------------------------

    def _next_uid(self) -> int:
        self._frame_uid += 1
        return self._frame_uid

    def unicast(self, frame: Frame, done: Callable[[MacOutcome], None] | None = None) -> None:
        """Queue an acknowledged unicast; ``done`` fires with the MAC outcome."""
        if frame.dst == BROADCAST:
            raise FrameError("unicast to BROADCAST")
        if (frame.src, frame.dst) not in self.links:
            raise FrameError(f"no link {frame.src}->{frame.dst}")
        frame.uid = self._next_uid()
        self._tx_queue[frame.src].append(("u", frame, done))
        self._kick(frame.src)

    def broadcast(self, frame: Frame) -> None:
        """Queue an unacknowledged broadcast to all neighbors."""
        if frame.dst != BROADCAST:
            raise FrameError("broadcast frame must address BROADCAST")
        frame.uid = self._next_uid()
        self._tx_queue[frame.src].append(("b", frame, None))
        self._kick(frame.src)

    def _kick(self, node: int) -> None:
        if self._tx_busy[node] or not self._tx_queue[node]:
            return
        self._tx_busy[node] = True
        mode, frame, done = self._tx_queue[node].popleft()
        if mode == "u":
            self._attempt(frame, done, attempt=1)
        else:
            self._do_broadcast(frame)

    def _finish(self, node: int) -> None:
        self._tx_busy[node] = False
        self._kick(node)

    def _attempt(self, frame: Frame, done, attempt: int) -> None:
        kernel = self.kernel
        mac = self.mac
        t0 = kernel.now
        air = airtime_us(frame.bytes, mac.phy_overhead_bytes)
        u, v = frame.src, frame.dst
        self._log_active(u, t0, air, "tx")
        self.trace.emit(t=t0, node=u, kind=tr.TX, frame=frame.kind, item=frame.item,
                        bytes=frame.bytes, app_bytes=frame.app_bytes or None,
                        src=u, dst=v, attempt=attempt, frame_uid=frame.uid)
        rng = kernel.rng.stream(f"mac:{u}>{v}")
        fwd = self.links[(u, v)]
        t_rx = t0 + air
        scale = self._delivery_scale(t0)
        self._note_air(t0, air)
        delivered = rng.random() < fwd.p_at(t0) * scale
        acked = False
        if delivered:
            rev = self.links.get((v, u))
            p_ack = rev.p_at(t_rx) if rev is not None else 1.0
            acked = rng.random() < p_ack * self._delivery_scale(t_rx)
        if delivered:
            self._log_active(v, t0, air, "rx")
            self.trace.emit(t=t_rx, node=v, kind=tr.RX, frame=frame.kind, item=frame.item,
                            bytes=frame.bytes, app_bytes=frame.app_bytes or None,
                            src=u, dst=v, attempt=attempt, frame_uid=frame.uid)
            # receiver acks immediately; the first received copy is delivered upward
            ack_air = airtime_us(MAC_ACK_BYTES, mac.phy_overhead_bytes)
            self._note_air(t_rx, ack_air)
            self._log_active(v, t_rx, ack_air, "tx")
            self.trace.emit(t=t_rx, node=v, kind=tr.TX, frame=tr.F_MAC_ACK,
                            bytes=MAC_ACK_BYTES, src=v, dst=u, frame_uid=frame.uid)
            receiver = self.receivers.get(v)
            if receiver is not None:
                kernel.schedule_at(t_rx, lambda f=frame, s=u: receiver(f, s))
            if acked:
                self._log_active(u, t_rx, ack_air, "rx")
                t_done = t_rx + ack_air
                self.trace.emit(t=t_done, node=u, kind=tr.RX, frame=tr.F_MAC_ACK,
                                bytes=MAC_ACK_BYTES, src=v, dst=u, frame_uid=frame.uid)
                self._ewma(u, v, True)
                kernel.schedule_at(t_done, lambda: self._complete(u, done, True, attempt, t_done))
                return
        # no ack: back off and retry, or give up
        t_timeout = t_rx + mac.ack_timeout_us
        if attempt <= mac.max_frame_retries:
            backoff = kernel.rng.stream(f"backoff:{u}").randrange(
                mac.backoff_lo_us, mac.backoff_hi_us + 1)
            kernel.schedule_at(t_timeout + backoff,
                               lambda: self._attempt(frame, done, attempt + 1))
        else:
            self._ewma(u, v, False)
            self.trace.emit(t=t_timeout, node=u, kind=tr.MAC_DROP, frame=frame.kind,
                            item=frame.item, bytes=frame.bytes, src=u, dst=v,
                            attempt=attempt, info="mac-exhausted", frame_uid=frame.uid)
            kernel.schedule_at(t_timeout, lambda: self._complete(u, done, False, attempt, t_timeout))

    def _complete(self, node: int, done, delivered: bool, attempts: int, t_end: int) -> None:
        self._finish(node)
        if done is not None:
            done(MacOutcome(delivered, attempts, t_end))

    def _do_broadcast(self, frame: Frame) -> None:
        kernel = self.kernel
        t0 = kernel.now
        air = airtime_us(frame.bytes, self.mac.phy_overhead_bytes)
        u = frame.src
        self._log_active(u, t0, air, "tx")
        self.trace.emit(t=t0, node=u, kind=tr.TX, frame=frame.kind, item=frame.item,
                        bytes=frame.bytes, app_bytes=frame.app_bytes or None,
                        src=u, dst=BROADCAST, attempt=1, frame_uid=frame.uid)
        t_rx = t0 + air
        scale = self._delivery_scale(t0)
        self._note_air(t0, air)
        for v in self.neighbors[u]:
            link = self.links.get((u, v))
            if link is None:
                continue
            rng = kernel.rng.stream(f"mac:{u}>{v}")
            if rng.random() < link.p_at(t0) * scale:
                self._log_active(v, t0, air, "rx")
                self.trace.emit(t=t_rx, node=v, kind=tr.RX, frame=frame.kind,
                                item=frame.item, bytes=frame.bytes,
                                app_bytes=frame.app_bytes or None,
                                src=u, dst=BROADCAST, attempt=1, frame_uid=frame.uid)
                receiver = self.receivers.get(v)
                if receiver is not None:
                    kernel.schedule_at(t_rx, lambda f=frame, s=u, r=receiver: r(f, s))
        kernel.schedule_at(t_rx, lambda: self._finish(u))

    def _ewma(self, u: int, v: int, ok: bool) -> None:
        prev = self.ewma_success.get((u, v), 1.0)
        self.ewma_success[(u, v)] = 0.8 * prev + 0.2 * (1.0 if ok else 0.0)
