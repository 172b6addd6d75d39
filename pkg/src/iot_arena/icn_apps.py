"""The three ICN application behaviors over the NDN forwarder: polling pull,
HoPP hop-wise publish/subscribe, and Interest Notification push.

HoPP replicates content toward the proxy one hop at a time: the holder
advertises a name to its parent, the parent pulls it with a regular
Interest/Data exchange, caches it, and advertises onward.  Every stage is
guarded by the 2 s x 4 retransmission budget; an exhausted advertisement
budget triggers an uplink switch to the best candidate parent.  Interest
Notifications invert the semantic by carrying the payload inside an Interest
acknowledged with an empty Data; nothing is cached along the path.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

from . import trace as tr
from .kernel import Kernel, SEC
from .ndn import DataMsg, Interest, LOCAL_FACE, Name, NdnForwarder, interest_bytes
from .phymac import Frame, Radio
from .topology import DEFAULT_PREFIX, TreeState

INOT_DEDUP_WINDOW = 8
SUBSCRIBE_LIFETIME_US = 60 * SEC
SUBSCRIBE_REFRESH_US = 45 * SEC


class ItemRegistry:
    """Shared bookkeeping: publish/request anchors and delivery dedup."""

    def __init__(self):
        self.publish_t: dict[Name, int] = {}
        self.request_t: dict[Name, int] = {}
        self.delivered: set[Name] = set()

    def anchor(self, name: Name, scheduled_pull: bool) -> int:
        if scheduled_pull and name in self.request_t:
            return self.request_t[name]
        return self.publish_t.get(name, 0)


class SinkDelivery:
    """Deliver-once gate at the content proxy; emits the deliver record."""

    def __init__(self, kernel: Kernel, trace: tr.Trace, node: int,
                 registry: ItemRegistry, scheduled_pull: bool = False):
        self.kernel = kernel
        self.trace = trace
        self.node = node
        self.registry = registry
        self.scheduled_pull = scheduled_pull

    def deliver(self, name: Name, payload_bytes: int) -> bool:
        if name in self.registry.delivered:
            return False
        self.registry.delivered.add(name)
        self.trace.emit(t=self.kernel.now, node=self.node, kind=tr.DELIVER,
                        item=name, app_bytes=payload_bytes,
                        pub_t=self.registry.anchor(name, self.scheduled_pull))
        return True


# ---------------------------------------------------------------------------
# NDN polling pull
# ---------------------------------------------------------------------------

class NdnPullConsumer:
    """Sink-side consumer: scheduled per-item requests or windowed 1 s polling.

    Scheduled mode expresses one Interest per expected (prefix, seq) at the
    publish cadence.  Unscheduled mode paces one new name per prefix per poll
    tick up to a pipeline window and re-expresses a pending name immediately
    when its Interest state expires, up to the re-expression budget.
    """

    REEXPRESS_BACKOFF_US = 50_000  # lets stale hop state age out first

    def __init__(self, kernel: Kernel, forwarder: NdnForwarder, sink: SinkDelivery,
                 registry: ItemRegistry, lifetime_us: int, scheduled: bool,
                 poll_interval_us: int = SEC, window: int = 8,
                 max_reexpress: int = 3, request_offset_us: int = 5000,
                 retry_period_us: int = 2 * SEC):
        self.kernel = kernel
        self.fwd = forwarder
        self.sink = sink
        self.registry = registry
        self.lifetime_us = lifetime_us
        self.scheduled = scheduled
        self.poll_interval_us = poll_interval_us
        self.window = window
        self.max_reexpress = max_reexpress
        self.request_offset_us = request_offset_us
        self.retry_period_us = retry_period_us
        self.reexpressed: dict[Name, int] = {}
        self.outstanding: dict[int, set[int]] = {}
        self.next_new: dict[int, int] = {}
        forwarder.on_local_data = self._on_data
        forwarder.on_local_expire = self._on_expire

    # scheduled mode -------------------------------------------------------

    def schedule_requests(self, plan: dict[int, list[tuple[int, int]]]) -> None:
        """plan: producer -> [(seq, publish_t)]; one Interest per expected item."""
        for producer, seq_times in plan.items():
            for seq, t_pub in seq_times:
                name = (producer, seq)
                self.kernel.schedule_at(t_pub + self.request_offset_us,
                                        lambda n=name: self._request_scheduled(n))

    def _request_scheduled(self, name: Name) -> None:
        self.registry.request_t.setdefault(name, self.kernel.now)
        self._express(name)

    def _express(self, name: Name) -> None:
        """Express with bounded retry while local Interest state is full."""
        if name in self.registry.delivered:
            return
        if not self.fwd.express_interest(Interest(name, self.lifetime_us)):
            horizon = (1 + self.max_reexpress) * self.lifetime_us
            first = self.registry.request_t.get(name, self.kernel.now)
            if self.kernel.now + self.retry_period_us - first < horizon:
                self.kernel.schedule(self.retry_period_us,
                                     lambda: self._express(name))

    # unscheduled mode -------------------------------------------------------

    def start_polling(self, prefixes: list[int]) -> None:
        for i, prefix in enumerate(sorted(prefixes)):
            self.outstanding[prefix] = set()
            self.next_new[prefix] = 1
            offset = (i * 37) % self.poll_interval_us  # deterministic stagger
            self.kernel.schedule(offset, lambda p=prefix: self._poll(p))

    def _poll(self, prefix: int) -> None:
        pending = self.outstanding[prefix]
        if len(pending) < self.window:
            seq = self.next_new[prefix]
            self.next_new[prefix] = seq + 1
            pending.add(seq)
            name = (prefix, seq)
            self.registry.request_t.setdefault(name, self.kernel.now)
            self.fwd.express_interest(Interest(name, self.lifetime_us))
        self.kernel.schedule(self.poll_interval_us, lambda: self._poll(prefix))

    # shared ----------------------------------------------------------------

    def _on_data(self, data: DataMsg) -> None:
        prefix, seq = data.name
        if prefix in self.outstanding:
            self.outstanding[prefix].discard(seq)
        self.sink.deliver(data.name, data.payload_bytes)

    def _on_expire(self, name: Name) -> None:
        count = self.reexpressed.get(name, 0)
        if count >= self.max_reexpress or name in self.registry.delivered:
            prefix, seq = name
            if prefix in self.outstanding:
                self.outstanding[prefix].discard(seq)
            return
        self.reexpressed[name] = count + 1
        # back off briefly so that expiring state along the path is really
        # gone; an immediate re-expression would be aggregated into a hop
        # entry that dies moments later, losing coverage for a full lifetime
        self.kernel.schedule(self.REEXPRESS_BACKOFF_US,
                             lambda: self._express(name))


class NdnProducer:
    """Producer app: serves its own prefix from the local store."""

    def __init__(self, forwarder: NdnForwarder, prefix: int):
        self.fwd = forwarder
        self.prefix = prefix
        forwarder.fib[prefix] = LOCAL_FACE

    def publish(self, seq: int, payload_bytes: int) -> None:
        self.fwd.publish((self.prefix, seq), payload_bytes)


# ---------------------------------------------------------------------------
# HoPP
# ---------------------------------------------------------------------------

@dataclass(slots=True)
class AdState:
    name: Name
    payload_bytes: int
    attempts: int = 0
    timer: object = None
    complete: bool = False


class HoppNode:
    """Per-node HoPP agent: advertise, pull-from-child, uplink switching."""

    PA_RETX_US = 2 * SEC
    PA_RETX_MAX = 4
    SWITCH_THRESHOLD = 1

    def __init__(self, kernel: Kernel, radio: Radio, forwarder: NdnForwarder,
                 node: int, tree: TreeState, trace: tr.Trace,
                 sink: Optional[SinkDelivery] = None):
        self.kernel = kernel
        self.radio = radio
        self.fwd = forwarder
        self.node = node
        self.tree = tree
        self.trace = trace
        self.sink = sink  # set on the content proxy only
        self.ads: dict[Name, AdState] = {}
        self.exhausted_cycles = 0
        forwarder.on_local_data = self._on_fetched
        forwarder.on_data_sent = self._on_data_sent
        forwarder.on_interest_seen = self._on_interest_seen
        forwarder.on_unsolicited_data = self._on_unsolicited_data

    @property
    def parent(self) -> Optional[int]:
        return self.tree.parent[self.node]

    # -- publishing and advertising ----------------------------------------

    def publish(self, seq: int, payload_bytes: int) -> None:
        name = (self.node, seq)
        self.fwd.publish(name, payload_bytes)
        self.advertise(name, payload_bytes)

    def advertise(self, name: Name, payload_bytes: int) -> None:
        if self.sink is not None:
            self.sink.deliver(name, payload_bytes)
            return
        if name in self.ads:
            return
        state = AdState(name, payload_bytes)
        self.ads[name] = state
        self._send_pa(state)

    def _send_pa(self, state: AdState) -> None:
        if state.complete or self.parent is None:
            return
        state.attempts += 1
        frame = Frame(src=self.node, dst=self.parent, kind=tr.F_PA,
                      bytes=interest_bytes(), item=state.name,
                      msg=("pa", state.name, state.payload_bytes))
        self.radio.unicast(frame)
        state.timer = self.kernel.schedule(self.PA_RETX_US,
                                           lambda: self._pa_timeout(state))

    def _pa_timeout(self, state: AdState) -> None:
        if state.complete:
            return
        if state.attempts <= self.PA_RETX_MAX:
            self._send_pa(state)
            return
        # advertisement budget exhausted toward this parent
        self.exhausted_cycles += 1
        if self.exhausted_cycles >= self.SWITCH_THRESHOLD:
            self.uplink_switch()
            self.exhausted_cycles = 0
        state.attempts = 0
        self._send_pa(state)

    # -- parent side ----------------------------------------------------------

    def on_pa(self, from_child: int, name: Name, payload_bytes: int) -> None:
        if self.fwd.cs.lookup(name) is not None:
            # We hold the item but the child still advertises: its transfer
            # confirmation was lost.  Pull once more so its hand-off completes.
            self.fwd.express_interest(Interest(name, self.fwd.cfg.lifetime_us),
                                      out_face=from_child, skip_cs=True)
            return
        entry = self.fwd.pit.get(name)
        if entry is not None:
            if entry.retx_count < self.fwd.cfg.retx_max:
                return  # fetch in progress
            self.fwd.drop_entry(name)  # stalled; the new advertisement re-arms it
        self.fwd.express_interest(Interest(name, self.fwd.cfg.lifetime_us),
                                  out_face=from_child)

    def _on_fetched(self, data: DataMsg) -> None:
        if self.sink is not None:
            self.sink.deliver(data.name, data.payload_bytes)
            return
        self.advertise(data.name, data.payload_bytes)

    def _on_unsolicited_data(self, face: int, data: DataMsg) -> bool:
        # Replication data climbing from below is always welcome, even when
        # our pull state expired just before it arrived.
        if data.is_ack:
            return False
        if self.fwd.cfg.cache_data:
            self.fwd.cs.insert(data.name, data.payload_bytes)
        self._on_fetched(data)
        return True

    def _on_data_sent(self, name: Name, face: int, ok: bool) -> None:
        state = self.ads.get(name)
        if state is None or state.complete:
            return
        if ok:
            state.complete = True
            if state.timer is not None:
                self.kernel.cancel(state.timer)

    def _on_interest_seen(self, name: Name, face: int) -> None:
        # An advertised item must stay servable until it is replicated upward,
        # even if transit traffic has evicted it from the cache meanwhile.
        state = self.ads.get(name)
        if state is not None and not state.complete \
                and self.fwd.cs.lookup(name) is None:
            self.fwd.cs.insert(name, state.payload_bytes)

    # -- uplink switching -------------------------------------------------------

    def uplink_switch(self) -> None:
        """Switch to the best candidate with a strictly lower rank than us.

        Equal-rank candidates would also keep the tree acyclic but lengthen
        the path and invite switch churn, so only sink-ward candidates are
        used.
        """
        current = self.parent
        my_rank = self.tree.rank[self.node]
        candidates = [
            c for c in self.tree.candidate_parents[self.node]
            if c != current and self.tree.rank[c] < my_rank
        ]
        if not candidates:
            return  # keep the parent, keep retrying
        ewma = self.radio.ewma_success
        candidates.sort(key=lambda c: (self.tree.rank[c],
                                       -ewma.get((self.node, c), 1.0), c))
        new_parent = candidates[0]
        self.tree.parent[self.node] = new_parent
        self._rerank()
        self.trace.emit(t=self.kernel.now, node=self.node, kind=tr.L3_DROP,
                        frame=tr.F_PA, info="uplink-switch", dst=new_parent,
                        src=current)
        self.tree.assert_tree(0)

    def _rerank(self) -> None:
        """Refresh ranks in our subtree after reparenting (local bookkeeping)."""
        stack = [self.node]
        while stack:
            cur = stack.pop()
            self.tree.rank[cur] = self.tree.rank[self.tree.parent[cur]] + 1
            stack.extend(self.tree.children(cur))


class HoppSubscriptions:
    """Proxy-side topic table with periodic subscription refresh one hop down.

    Refresh frames are control traffic (Interest-sized, not item-attributed);
    deliveries themselves ride the hop-wise advertisement chain.
    """

    def __init__(self, kernel: Kernel, radio: Radio, node: int, tree: TreeState,
                 prefixes: list[int],
                 refresh_us: int = SUBSCRIBE_REFRESH_US):
        self.kernel = kernel
        self.radio = radio
        self.node = node
        self.tree = tree
        self.topics = {p: 1 for p in sorted(prefixes)}  # prefix -> next expected seq
        self.refresh_us = refresh_us
        self.running = False

    def start(self) -> None:
        self.running = True
        self._refresh()

    def stop(self) -> None:
        self.running = False

    def _refresh(self) -> None:
        if not self.running:
            return
        for child in self.tree.children(self.node):
            frame = Frame(src=self.node, dst=child, kind=tr.F_INTEREST,
                          bytes=interest_bytes(), msg=("hopp-sub", SUBSCRIBE_LIFETIME_US))
            self.radio.unicast(frame)
        self.kernel.schedule(self.refresh_us, self._refresh)

    def note_delivered(self, name: Name) -> None:
        prefix, seq = name
        nxt = self.topics.get(prefix)
        if nxt is not None and seq >= nxt:
            self.topics[prefix] = seq + 1


# ---------------------------------------------------------------------------
# Interest Notification
# ---------------------------------------------------------------------------

class InotProducer:
    """Pushes each item inside an Interest toward the sink via the default route."""

    def __init__(self, forwarder: NdnForwarder, prefix: int):
        self.fwd = forwarder
        self.prefix = prefix

    def publish(self, seq: int, payload_bytes: int) -> None:
        name = (self.prefix, seq)
        self.fwd.express_interest(
            Interest(name, self.fwd.cfg.lifetime_us, payload_bytes=payload_bytes))


class InotSink:
    """Delivers notification payloads once and acks with an empty Data."""

    def __init__(self, forwarder: NdnForwarder, sink: SinkDelivery):
        self.fwd = forwarder
        self.sink = sink
        self._seen: dict[int, deque] = {}
        forwarder.fib[DEFAULT_PREFIX] = LOCAL_FACE
        forwarder.on_local_interest = self._on_notification

    def _on_notification(self, interest: Interest, in_face: int) -> None:
        prefix, seq = interest.name
        seen = self._seen.setdefault(prefix, deque(maxlen=INOT_DEDUP_WINDOW))
        if seq not in seen:
            seen.append(seq)
            self.sink.deliver(interest.name, interest.payload_bytes)
        # satisfy the reverse path with an empty ack
        self.fwd.on_data(LOCAL_FACE, DataMsg(interest.name, 0, is_ack=True))
