"""Deterministic discrete-event engine: virtual clock, event queue, seeded randomness.

All simulation time is kept in integer microseconds.  Events with equal
fire time dispatch in insertion order, so a run is a pure function of its
configuration and seed.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from typing import Callable

# Time unit helpers (integer microseconds).
US = 1
MS = 1_000
SEC = 1_000_000


class SimTimeError(ValueError):
    """Raised when an operation would move the virtual clock backwards."""


class EventHandle:
    """Ticket for a scheduled action; cancellation is permanent."""

    __slots__ = ("id", "fire_at", "cancelled", "_fired")

    def __init__(self, event_id: int, fire_at: int):
        self.id = event_id
        self.fire_at = fire_at
        self.cancelled = False
        self._fired = False

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        state = "cancelled" if self.cancelled else ("fired" if self._fired else "pending")
        return f"EventHandle(id={self.id}, fire_at={self.fire_at}, {state})"


class RunSeed:
    """Root seed plus named substreams, one per (node, module) label.

    Substreams keep random draws of unrelated components independent: adding
    a protocol or reordering draws in one module does not perturb link loss,
    topology geometry, or schedules elsewhere, which keeps cross-protocol
    comparisons under one seed stable.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._streams: dict[str, random.Random] = {}

    def stream(self, label: str) -> random.Random:
        """Return the RNG for ``label``, creating it deterministically on first use."""
        rng = self._streams.get(label)
        if rng is None:
            digest = hashlib.sha256(f"{self.seed}:{label}".encode()).digest()
            rng = random.Random(int.from_bytes(digest[:8], "big"))
            self._streams[label] = rng
        return rng

    def derive(self, offset: int) -> "RunSeed":
        """Seed for repetition ``offset`` of a sweep."""
        return RunSeed(self.seed + offset)


class Kernel:
    """Single-threaded event loop over a (fire_at, id) total order."""

    def __init__(self, seed: int = 0):
        self.rng = RunSeed(seed)
        self._now = 0
        self._next_id = 0
        self._queue: list[tuple[int, int, EventHandle, Callable[[], None]]] = []
        self.dispatched = 0

    @property
    def now(self) -> int:
        return self._now

    def schedule(self, delay: int, action: Callable[[], None]) -> EventHandle:
        """Schedule ``action`` to fire at ``now + delay``.

        Ties at the same tick dispatch in scheduling order.
        """
        if delay < 0:
            raise SimTimeError(f"negative delay: {delay}")
        handle = EventHandle(self._next_id, self._now + int(delay))
        self._next_id += 1
        heapq.heappush(self._queue, (handle.fire_at, handle.id, handle, action))
        return handle

    def schedule_at(self, t: int, action: Callable[[], None]) -> EventHandle:
        """Schedule ``action`` at absolute time ``t`` (t >= now)."""
        if t < self._now:
            raise SimTimeError(f"cannot schedule in the past: {t} < {self._now}")
        return self.schedule(t - self._now, action)

    def cancel(self, handle: EventHandle) -> bool:
        """Cancel ``handle``; returns True iff it had not yet fired."""
        if handle._fired or handle.cancelled:
            return False
        handle.cancelled = True
        return True

    def run_until(self, t_end: int) -> int:
        """Dispatch every non-cancelled event with fire_at <= t_end; clock ends at t_end.

        Events scheduled by handlers inside the window are dispatched in the
        same call.  Returns the number of dispatched events.
        """
        if t_end < self._now:
            raise SimTimeError(f"t_end {t_end} is before now {self._now}")
        count = 0
        queue = self._queue
        while queue and queue[0][0] <= t_end:
            fire_at, _, handle, action = heapq.heappop(queue)
            if handle.cancelled:
                continue
            self._now = fire_at
            handle._fired = True
            action()
            count += 1
        self._now = t_end
        self.dispatched += count
        return count

    def pending(self) -> int:
        """Number of queued, not-yet-cancelled events (diagnostics only)."""
        return sum(1 for _, _, h, _ in self._queue if not h.cancelled)
