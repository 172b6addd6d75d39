"""Traffic generation and experiment orchestration for the scenario matrix.

A run is a pure function of its :class:`ScenarioConfig`: topology, routes,
protocol agents, traffic schedule, and link behavior are all derived from the
config and its seed.  Each run owns a private kernel and shares nothing with
concurrent runs.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Optional

from . import coap as coap_mod
from . import icn_apps as icn
from . import mqttsn as mqtt_mod
from . import trace as tr
from .ip import IpStack
from .kernel import Kernel, RunSeed, SEC
from .ndn import DataMsg, Interest, NdnConfig, NdnForwarder
from .phymac import Frame, MacConfig, Radio
from .topology import (Beaconing, Topology, TreeState, build_chain,
                       build_single_hop, build_tree, install_routes)

PROTOCOLS = (
    "ndn", "hopp", "inot",
    "coap-put-con", "coap-put-non", "coap-get-con", "coap-get-non", "coap-observe",
    "mqtt-q0", "mqtt-q1",
)

PULL_PROTOCOLS = {"ndn", "coap-get-con", "coap-get-non"}


class ConfigError(ValueError):
    pass


@dataclass
class ScheduleSpec:
    """Publish timing: periodic cadence with optional jitter, or uniform gaps."""

    mode: str = "periodic"  # periodic | uniform
    interval_us: int = 5 * SEC
    jitter_frac: float = 0.0
    lo_us: int = 1 * SEC
    hi_us: int = 3 * SEC
    items_per_node: int = 100

    def validate(self) -> None:
        if self.mode == "periodic":
            if self.interval_us <= 0:
                raise ConfigError("periodic interval must be positive")
        elif self.mode == "uniform":
            if not self.lo_us < self.hi_us:
                raise ConfigError("uniform schedule requires lo < hi")
        else:
            raise ConfigError(f"unknown schedule mode {self.mode!r}")
        if self.items_per_node < 1:
            raise ConfigError("items_per_node must be >= 1")


@dataclass
class TopologySpec:
    kind: str = "single-hop"  # single-hop | tree | chain
    p: float = 0.99
    n: int = 50
    depth_range: tuple[int, int] = (4, 6)
    p_range: tuple[float, float] = (0.80, 0.95)
    p_up: float = 0.8  # chain only: toward the sink
    p_down: float = 1.0

    def validate(self) -> None:
        if self.kind not in ("single-hop", "tree", "chain"):
            raise ConfigError(f"unknown topology kind {self.kind!r}")


@dataclass
class LinkFlapSpec:
    """Episodic link degradation: the folded-interference knob for multi-hop runs."""

    mean_gap_us: int = 300 * SEC
    duration_lo_us: int = 6 * SEC
    duration_hi_us: int = 20 * SEC
    factor: float = 0.12


@dataclass
class InterferenceSpec:
    """Self-induced interference folded into per-attempt delivery probability."""

    beta: float = 0.0  # 0 disables the channel-load feedback
    window_us: int = 150_000


@dataclass
class TimerSpec:
    retx_period_us: int = 2 * SEC
    retx_max: int = 4
    interest_lifetime_us: int = 10 * SEC


@dataclass
class SizingSpec:
    payload_bytes: int = 48
    pit_capacity: int = 16
    pit_capacity_sink: int = 256  # the gateway is not a class-2 device
    pit_policy: str = "drop-new"
    cs_capacity_bytes: int = 10240
    fib_capacity: int = 50
    pit_capacity_overrides: dict = field(default_factory=dict)  # node -> capacity


@dataclass
class NdnOptions:
    retx_mode: str = "timer"  # timer | feedback
    pull_window: int = 8
    max_reexpress: int = 3
    request_offset_us: int = 5000


@dataclass
class CoapOptions:
    exchange_slots: int = 2  # constrained-node request pool
    exchange_slots_sink: int = 64


@dataclass
class MqttOptions:
    queue_cap: int = 64


@dataclass
class MetricOptions:
    goodput_window_us: int = 10 * SEC
    energy_sample_us: int = 10 * SEC
    power_tx_mw: float = 42.0
    power_rx_mw: float = 37.0
    power_idle_mw: float = 0.0006  # transceiver SLEEP state


@dataclass
class ScenarioConfig:
    """Full declarative description of one experiment."""

    name: str = "scenario"
    protocol: str = "ndn"
    seed: int = 1
    repetitions: int = 1
    topology: TopologySpec = field(default_factory=TopologySpec)
    schedule: ScheduleSpec = field(default_factory=ScheduleSpec)
    poll_interval_us: int = 1 * SEC
    timers: TimerSpec = field(default_factory=TimerSpec)
    sizing: SizingSpec = field(default_factory=SizingSpec)
    ndn: NdnOptions = field(default_factory=NdnOptions)
    coap: CoapOptions = field(default_factory=CoapOptions)
    mqtt: MqttOptions = field(default_factory=MqttOptions)
    metric: MetricOptions = field(default_factory=MetricOptions)
    link_flap: Optional[LinkFlapSpec] = None
    interference: InterferenceSpec = field(default_factory=InterferenceSpec)
    warmup_us: int = 30 * SEC
    drain_us: int = 20 * SEC
    proc_delay_us: int = 1500
    beacon_interval_us: int = 10 * SEC
    mac_frame_retries: int = 3

    def validate(self) -> None:
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"unknown protocol {self.protocol!r}")
        self.topology.validate()
        self.schedule.validate()
        if self.poll_interval_us <= 0:
            raise ConfigError("poll interval must be positive")
        if self.drain_us < self.timers.interest_lifetime_us + \
                self.timers.retx_max * self.timers.retx_period_us:
            raise ConfigError("drain shorter than lifetime + retransmission budget")

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        out = asdict(self)
        if self.link_flap is None:
            out["link_flap"] = None
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioConfig":
        kw = dict(raw)
        for key, sub in (("topology", TopologySpec), ("schedule", ScheduleSpec),
                         ("timers", TimerSpec), ("sizing", SizingSpec),
                         ("ndn", NdnOptions), ("coap", CoapOptions),
                         ("mqtt", MqttOptions), ("metric", MetricOptions),
                         ("interference", InterferenceSpec)):
            if key in kw and isinstance(kw[key], dict):
                kw[key] = sub(**kw[key])
        if kw.get("link_flap") is not None and isinstance(kw["link_flap"], dict):
            kw["link_flap"] = LinkFlapSpec(**kw["link_flap"])
        if "topology" in kw and isinstance(kw["topology"].depth_range, list):
            kw["topology"].depth_range = tuple(kw["topology"].depth_range)
        if "topology" in kw and isinstance(kw["topology"].p_range, list):
            kw["topology"].p_range = tuple(kw["topology"].p_range)
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def clone(self, **overrides) -> "ScenarioConfig":
        """Deep copy (nested specs are not shared) with top-level overrides."""
        cfg = ScenarioConfig.from_dict(self.to_dict())
        for key, value in overrides.items():
            setattr(cfg, key, value)
        return cfg


def make_publish_times(spec: ScheduleSpec, seed: RunSeed,
                       producers: list[int]) -> dict[int, list[int]]:
    """Per-producer publish instants relative to traffic start.

    Periodic mode jitters each gap by a fraction of the interval and gives
    every producer a uniform phase offset; uniform mode draws i.i.d. gaps.
    """
    out: dict[int, list[int]] = {}
    for node in producers:
        rng = seed.stream(f"sched:{node}")
        times: list[int] = []
        if spec.mode == "periodic":
            offset = int(rng.random() * spec.interval_us)
            t = offset
            for _ in range(spec.items_per_node):
                gap = spec.interval_us
                if spec.jitter_frac > 0.0:
                    gap = int(gap * (1.0 + spec.jitter_frac * (2.0 * rng.random() - 1.0)))
                t += gap
                times.append(t)
        else:
            t = 0
            for _ in range(spec.items_per_node):
                t += rng.randrange(spec.lo_us, spec.hi_us + 1)
                times.append(t)
        out[node] = times
    return out


@dataclass
class RunResult:
    config: ScenarioConfig
    trace: tr.Trace
    topo: Topology
    tree: TreeState
    t_end: int
    published: int

    def topology_dump(self) -> dict:
        return {
            "nodes": self.topo.nodes,
            "sink": self.topo.sink,
            "links": [
                {"src": u, "dst": v, "p": round(p, 6)}
                for (u, v), p in sorted(self.topo.link_p.items())
            ],
            "parents": {str(n): p for n, p in sorted(self.tree.parent.items())},
            "ranks": {str(n): r for n, r in sorted(self.tree.rank.items())},
        }


def _episodes_for(seed: RunSeed, u: int, v: int, flap: LinkFlapSpec,
                  horizon_us: int) -> list[tuple[int, int]]:
    rng = seed.stream(f"flap:{u}-{v}")
    episodes = []
    t = 0
    while True:
        t += int(rng.expovariate(1.0 / flap.mean_gap_us))
        if t >= horizon_us:
            break
        dur = rng.randrange(flap.duration_lo_us, flap.duration_hi_us + 1)
        episodes.append((t, min(t + dur, horizon_us)))
        t += dur
    return episodes


class _Run:
    """Mutable state of one experiment while it executes."""

    def __init__(self, config: ScenarioConfig):
        config.validate()
        self.cfg = config
        self.kernel = Kernel(config.seed)
        self.trace = tr.Trace(proto=config.protocol)
        self.registry = icn.ItemRegistry()
        self.radio: Radio | None = None
        self.topo: Topology | None = None
        self.tree: TreeState | None = None

    # -- setup ---------------------------------------------------------------

    def build(self) -> None:
        cfg = self.cfg
        if cfg.topology.kind == "single-hop":
            self.topo, self.tree = build_single_hop(cfg.topology.p)
        elif cfg.topology.kind == "chain":
            self.topo, self.tree = build_chain(cfg.topology.n, cfg.topology.p_up,
                                               cfg.topology.p_down)
        else:
            self.topo, self.tree = build_tree(cfg.topology.n, self.kernel.rng,
                                              cfg.topology.depth_range,
                                              cfg.topology.p_range)
        self.radio = Radio(self.kernel, self.trace,
                           MacConfig(max_frame_retries=cfg.mac_frame_retries),
                           interference_beta=cfg.interference.beta,
                           util_window_us=cfg.interference.window_us)
        times = make_publish_times(cfg.schedule, self.kernel.rng,
                                   self.topo.producers())
        self.publish_times = {
            node: [cfg.warmup_us + t for t in ts] for node, ts in times.items()
        }
        last_publish = max(ts[-1] for ts in self.publish_times.values())
        self.t_end = last_publish + cfg.drain_us
        for (u, v), p in sorted(self.topo.link_p.items()):
            episodes = None
            factor = 1.0
            if cfg.link_flap is not None:
                a, b = min(u, v), max(u, v)
                episodes = _episodes_for(self.kernel.rng, a, b, cfg.link_flap,
                                         self.t_end)
                factor = cfg.link_flap.factor
            self.radio.add_link(u, v, p, episodes, factor)

    def ndn_config(self, node: int, retx_mode: str, cache_data: bool = True) -> NdnConfig:
        cfg = self.cfg
        capacity = cfg.sizing.pit_capacity
        if node == self.topo.sink:
            capacity = cfg.sizing.pit_capacity_sink
        overrides = cfg.sizing.pit_capacity_overrides
        capacity = overrides.get(node, overrides.get(str(node), capacity))
        return NdnConfig(
            pit_capacity=capacity,
            pit_policy=cfg.sizing.pit_policy,
            cs_capacity_bytes=cfg.sizing.cs_capacity_bytes,
            retx_period_us=cfg.timers.retx_period_us,
            retx_max=cfg.timers.retx_max,
            lifetime_us=cfg.timers.interest_lifetime_us,
            retx_mode=retx_mode,
            proc_delay_us=cfg.proc_delay_us,
            cache_data=cache_data,
        )

    # -- publish driver -------------------------------------------------------

    def drive_publishes(self, publish_fn) -> int:
        count = 0
        for node in sorted(self.publish_times):
            for seq0, t in enumerate(self.publish_times[node]):
                seq = seq0 + 1
                name = (node, seq)
                self.registry.publish_t[name] = t
                self.kernel.schedule_at(
                    t, lambda n=node, s=seq, nm=name: self._publish(publish_fn, n, s, nm))
                count += 1
        return count

    def _publish(self, publish_fn, node: int, seq: int, name) -> None:
        self.trace.emit(t=self.kernel.now, node=node, kind=tr.PUBLISH, item=name,
                        app_bytes=self.cfg.sizing.payload_bytes)
        publish_fn(node, seq)


def run_experiment(config: ScenarioConfig) -> RunResult:
    """Build the topology, bootstrap the protocol, drive traffic, drain, return the trace."""
    run = _Run(config)
    run.build()
    proto = config.protocol
    if proto == "ndn":
        published = _setup_ndn_pull(run)
    elif proto == "hopp":
        published = _setup_hopp(run)
    elif proto == "inot":
        published = _setup_inot(run)
    elif proto.startswith("coap"):
        published = _setup_coap(run)
    else:
        published = _setup_mqtt(run)

    beacons = Beaconing(run.kernel, run.radio, run.topo, run.tree,
                        interval_us=config.beacon_interval_us)
    _wire_beacon_dispatch(run, beacons)
    beacons.start()

    sample = config.metric.energy_sample_us
    t = 0
    while t <= run.t_end:
        run.kernel.schedule_at(t, run.radio.sample_states)
        t += sample
    if run.t_end % sample != 0:
        run.kernel.schedule_at(run.t_end, run.radio.sample_states)

    run.kernel.run_until(run.t_end)
    return RunResult(config=config, trace=run.trace, topo=run.topo, tree=run.tree,
                     t_end=run.t_end, published=published)


def _wire_beacon_dispatch(run: _Run, beacons: Beaconing) -> None:
    """Wrap each node's receiver so beacons update parent candidates."""
    for node in run.topo.nodes:
        inner = run.radio.receivers.get(node)

        def dispatch(frame: Frame, from_node: int, node=node, inner=inner):
            if frame.kind == tr.F_BEACON:
                beacons.on_beacon(node, from_node, frame.msg[1])
                return
            if inner is not None:
                inner(frame, from_node)

        run.radio.attach(node, dispatch)


# ---------------------------------------------------------------------------
# per-protocol wiring
# ---------------------------------------------------------------------------

def _setup_ndn_pull(run: _Run) -> int:
    cfg = run.cfg
    topo, tree = run.topo, run.tree
    scheduled = cfg.schedule.mode == "periodic"
    tables = install_routes(topo, tree, "ndn-pull", cfg.sizing.fib_capacity)
    forwarders: dict[int, NdnForwarder] = {}
    for node in topo.nodes:
        fwd = NdnForwarder(run.kernel, run.radio, node, run.trace,
                           run.ndn_config(node, cfg.ndn.retx_mode), cfg.protocol)
        fwd.fib.update(tables.ndn_fib[node])
        forwarders[node] = fwd
        _attach_ndn(run, node, fwd)
    producers = {
        node: icn.NdnProducer(forwarders[node], node) for node in topo.producers()
    }
    sink = icn.SinkDelivery(run.kernel, run.trace, topo.sink, run.registry,
                            scheduled_pull=scheduled)
    consumer = icn.NdnPullConsumer(
        run.kernel, forwarders[topo.sink], sink, run.registry,
        cfg.timers.interest_lifetime_us, scheduled,
        poll_interval_us=cfg.poll_interval_us, window=cfg.ndn.pull_window,
        max_reexpress=cfg.ndn.max_reexpress,
        request_offset_us=cfg.ndn.request_offset_us,
        retry_period_us=cfg.timers.retx_period_us)
    if scheduled:
        plan = {
            node: [(i + 1, t) for i, t in enumerate(ts)]
            for node, ts in run.publish_times.items()
        }
        consumer.schedule_requests(plan)
    else:
        run.kernel.schedule_at(cfg.warmup_us,
                               lambda: consumer.start_polling(topo.producers()))
    return run.drive_publishes(lambda node, seq: producers[node].publish(
        seq, cfg.sizing.payload_bytes))


def _attach_ndn(run: _Run, node: int, fwd: NdnForwarder,
                hopp: icn.HoppNode | None = None) -> None:
    proc = run.cfg.proc_delay_us

    def on_frame(frame: Frame, from_node: int):
        msg = frame.msg
        if isinstance(msg, Interest):
            run.kernel.schedule(proc, lambda: fwd.on_interest(from_node, msg))
        elif isinstance(msg, DataMsg):
            run.kernel.schedule(proc, lambda: fwd.on_data(from_node, msg))
        elif isinstance(msg, tuple) and msg[0] == "pa" and hopp is not None:
            run.kernel.schedule(proc, lambda: hopp.on_pa(from_node, msg[1], msg[2]))
        # hopp-sub frames refresh subscription state only

    run.radio.attach(node, on_frame)


def _setup_hopp(run: _Run) -> int:
    cfg = run.cfg
    topo, tree = run.topo, run.tree
    sink_delivery = icn.SinkDelivery(run.kernel, run.trace, topo.sink, run.registry)
    agents: dict[int, icn.HoppNode] = {}
    for node in topo.nodes:
        fwd = NdnForwarder(run.kernel, run.radio, node, run.trace,
                           run.ndn_config(node, "timer"), cfg.protocol)
        # HoPP pulls are always face-directed; content is served from the
        # cache (or the advertisement state), never routed via a FIB.
        agent = icn.HoppNode(run.kernel, run.radio, fwd, node, tree, run.trace,
                             sink=sink_delivery if node == topo.sink else None)
        agents[node] = agent
        _attach_ndn(run, node, fwd, hopp=agent)
    subs = icn.HoppSubscriptions(run.kernel, run.radio, topo.sink, tree,
                                 topo.producers())
    run.kernel.schedule(SEC, subs.start)
    return run.drive_publishes(lambda node, seq: agents[node].publish(
        seq, cfg.sizing.payload_bytes))


def _setup_inot(run: _Run) -> int:
    cfg = run.cfg
    topo, tree = run.topo, run.tree
    tables = install_routes(topo, tree, "ndn-up", cfg.sizing.fib_capacity)
    forwarders: dict[int, NdnForwarder] = {}
    for node in topo.nodes:
        fwd = NdnForwarder(run.kernel, run.radio, node, run.trace,
                           run.ndn_config(node, "timer", cache_data=False),
                           cfg.protocol)
        fwd.fib.update(tables.ndn_fib[node])
        forwarders[node] = fwd
        _attach_ndn(run, node, fwd)
    sink = icn.SinkDelivery(run.kernel, run.trace, topo.sink, run.registry)
    icn.InotSink(forwarders[topo.sink], sink)
    producers = {
        node: icn.InotProducer(forwarders[node], node) for node in topo.producers()
    }
    return run.drive_publishes(lambda node, seq: producers[node].publish(
        seq, cfg.sizing.payload_bytes))


def _setup_coap(run: _Run) -> int:
    cfg = run.cfg
    topo, tree = run.topo, run.tree
    proto = cfg.protocol
    confirmable = proto.endswith("-con")
    scheduled = cfg.schedule.mode == "periodic"
    tables = install_routes(topo, tree, "ip", cfg.sizing.fib_capacity)
    endpoints: dict[int, coap_mod.CoapEndpoint] = {}
    for node in topo.nodes:
        ip = IpStack(run.kernel, run.radio, node, run.trace, tables.ip_fib[node],
                     cfg.proc_delay_us)
        run.radio.attach(node, ip.on_frame)
        slots = (cfg.coap.exchange_slots_sink if node == topo.sink
                 else cfg.coap.exchange_slots)
        endpoints[node] = coap_mod.CoapEndpoint(
            run.kernel, ip, node, run.trace, exchange_slots=slots)
    sink_node = topo.sink
    sink = icn.SinkDelivery(run.kernel, run.trace, sink_node, run.registry,
                            scheduled_pull=scheduled and proto.startswith("coap-get"))
    payload = cfg.sizing.payload_bytes

    if proto.startswith("coap-put"):
        mtype = coap_mod.CON if confirmable else coap_mod.NON

        def sink_request(msg, peer, duplicate):
            if msg.code == "PUT" and not duplicate and msg.item is not None:
                sink.deliver(msg.item, msg.payload_bytes)
            return None

        endpoints[sink_node].on_request = sink_request

        def publish(node, seq):
            ep = endpoints[node]
            msg = coap_mod.CoapMessage(
                mtype=mtype, code="PUT", mid=ep.next_mid(), token=ep.next_token(),
                uri=node, payload_bytes=payload, item=(node, seq))
            ep.send(sink_node, msg, coap_mod.request_bytes(payload))

        return run.drive_publishes(publish)

    if proto.startswith("coap-get"):
        mtype = coap_mod.CON if confirmable else coap_mod.NON

        for node in topo.producers():
            ep = endpoints[node]

            def handler(msg, peer, duplicate, ep=ep):
                if msg.code != "GET":
                    return None
                latest = ep.resource_latest
                if latest is None:
                    return coap_mod.CoapMessage(
                        mtype=coap_mod.ACK, code="2.05", mid=msg.mid,
                        token=msg.token, uri=msg.uri)
                item, size, _ = latest
                return coap_mod.CoapMessage(
                    mtype=coap_mod.ACK, code="2.05", mid=msg.mid, token=msg.token,
                    uri=msg.uri, payload_bytes=size, item=item)

            ep.on_request = handler

        def sink_response(msg, peer):
            if msg.item is not None:
                sink.deliver(msg.item, msg.payload_bytes)

        endpoints[sink_node].on_response = sink_response

        def poll(producer: int, intended=None):
            ep = endpoints[sink_node]
            if intended is not None:
                run.registry.request_t.setdefault(intended, run.kernel.now)
            msg = coap_mod.CoapMessage(
                mtype=mtype, code="GET", mid=ep.next_mid(), token=ep.next_token(),
                uri=producer, item=intended)
            ep.send(producer, msg, coap_mod.request_bytes(0))

        if scheduled:
            for node, ts in run.publish_times.items():
                for i, t in enumerate(ts):
                    run.kernel.schedule_at(
                        t + cfg.ndn.request_offset_us,
                        lambda n=node, it=(node, i + 1): poll(n, it))
        else:
            def start_polls():
                for i, node in enumerate(sorted(topo.producers())):
                    offset = (i * 37) % cfg.poll_interval_us
                    run.kernel.schedule(offset, lambda n=node: _tick(n))

            def _tick(node):
                poll(node)
                run.kernel.schedule(cfg.poll_interval_us, lambda: _tick(node))

            run.kernel.schedule_at(cfg.warmup_us, start_polls)

        def publish(node, seq):
            endpoints[node].resource_latest = ((node, seq), payload, run.kernel.now)

        return run.drive_publishes(publish)

    # coap-observe
    registered: set[int] = set()

    def sink_response(msg, peer):
        if msg.observe is not None and msg.item is not None:
            sink.deliver(msg.item, msg.payload_bytes)

    endpoints[sink_node].on_response = sink_response

    for node in topo.producers():
        ep = endpoints[node]

        def handler(msg, peer, duplicate, node=node, ep=ep):
            if msg.observe == 0:
                ep.observers[peer] = (msg.token, 0)
                return coap_mod.CoapMessage(
                    mtype=coap_mod.ACK, code="2.05", mid=msg.mid, token=msg.token,
                    uri=msg.uri, observe=0)
            return None

        ep.on_request = handler

    def register(node: int):
        ep = endpoints[sink_node]
        msg = coap_mod.CoapMessage(
            mtype=coap_mod.CON, code="GET", mid=ep.next_mid(), token=ep.next_token(),
            uri=node, observe=0)

        def done(ok: bool, node=node):
            if ok:
                registered.add(node)
            else:
                register(node)  # retry the registration cycle

        ep.send(node, msg, coap_mod.request_bytes(0, observe=True), done)

    rng = run.kernel.rng.stream("observe-reg")
    for i, node in enumerate(sorted(topo.producers())):
        run.kernel.schedule(SEC + int(rng.random() * 10 * SEC),
                            lambda n=node: register(n))

    def publish(node, seq):
        ep = endpoints[node]
        for observer, (token, counter) in sorted(ep.observers.items()):
            counter += 1
            ep.observers[observer] = (token, counter)
            msg = coap_mod.CoapMessage(
                mtype=coap_mod.NON, code="2.05", mid=ep.next_mid(), token=token,
                uri=node, observe=counter, payload_bytes=payload, item=(node, seq))
            ep.send(observer, msg,
                    coap_mod.response_bytes(payload, observe=True))

    return run.drive_publishes(publish)


def _setup_mqtt(run: _Run) -> int:
    cfg = run.cfg
    topo, tree = run.topo, run.tree
    qos = 0 if cfg.protocol == "mqtt-q0" else 1
    tables = install_routes(topo, tree, "ip", cfg.sizing.fib_capacity)
    sink_node = topo.sink
    sink = icn.SinkDelivery(run.kernel, run.trace, sink_node, run.registry)

    broker_ip = IpStack(run.kernel, run.radio, sink_node, run.trace,
                        tables.ip_fib[sink_node], cfg.proc_delay_us)
    run.radio.attach(sink_node, broker_ip.on_frame)
    broker = mqtt_mod.MqttBroker(run.kernel, broker_ip, sink_node, run.trace)
    broker.on_deliver = lambda item, client, size: sink.deliver(item, size)

    clients: dict[int, mqtt_mod.MqttClient] = {}
    rng = run.kernel.rng.stream("mqtt-boot")
    for node in sorted(topo.producers()):
        ip = IpStack(run.kernel, run.radio, node, run.trace, tables.ip_fib[node],
                     cfg.proc_delay_us)
        run.radio.attach(node, ip.on_frame)
        client = mqtt_mod.MqttClient(run.kernel, ip, node, sink_node, run.trace,
                                     qos, queue_cap=cfg.mqtt.queue_cap)
        clients[node] = client
        run.kernel.schedule(SEC + int(rng.random() * 10 * SEC), client.bootstrap)

    return run.drive_publishes(lambda node, seq: clients[node].publish(
        (node, seq), cfg.sizing.payload_bytes))
