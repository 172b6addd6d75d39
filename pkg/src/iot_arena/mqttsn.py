"""MQTT-SN client (producers) and broker (sink): connect, topic registration,
publish at QoS 0/1 with end-to-end retransmission.

A client serializes its QoS 1 publishes behind a single in-flight window with
a bounded FIFO backlog; each in-flight message follows the aligned 2 s x 4
retransmission policy and is abandoned on timeout.  The broker deduplicates on
(client, msg_id) and always acknowledges, so delivery to the application is
exactly-once per accepted message id.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable, Optional

from . import trace as tr
from .ip import IP_UDP_OVERHEAD_BYTES, IpPacket, IpStack
from .kernel import Kernel, SEC

CONNECT, CONNACK = "CONNECT", "CONNACK"
REGISTER, REGACK = "REGISTER", "REGACK"
PUBLISH, PUBACK = "PUBLISH", "PUBACK"

CONNECT_BYTES = 10
CONNACK_BYTES = 3
TOPIC_NAME_BYTES = 10
REGISTER_BYTES = 7 + TOPIC_NAME_BYTES
REGACK_BYTES = 7
PUBLISH_HEADER_BYTES = 7
PUBACK_BYTES = 7

RETX_PERIOD_US = 2 * SEC
MAX_RETX = 4
DEDUP_WINDOW = 16
DEFAULT_QUEUE_CAP = 64


def wire_bytes(payload_and_header: int) -> int:
    return IP_UDP_OVERHEAD_BYTES + payload_and_header


@dataclass(slots=True)
class MqttSnMessage:
    mtype: str
    topic_id: int = 0
    msg_id: int = 0
    qos: int = 0
    dup: bool = False
    payload_bytes: int = 0
    item: Optional[tuple[int, int]] = None
    client: int = 0


class MqttClient:
    """Producer-side session: bootstrap then publish under the assigned topic id."""

    STATE_DISCONNECTED = "disconnected"
    STATE_CONNECTING = "connecting"
    STATE_REGISTERING = "registering"
    STATE_ACTIVE = "active"

    def __init__(self, kernel: Kernel, ip: IpStack, node: int, broker: int,
                 trace: tr.Trace, qos: int, queue_cap: int = DEFAULT_QUEUE_CAP):
        self.kernel = kernel
        self.ip = ip
        self.node = node
        self.broker = broker
        self.trace = trace
        self.qos = qos
        self.queue_cap = queue_cap
        self.state = self.STATE_DISCONNECTED
        self.topic_id: Optional[int] = None
        self._msg_id = 0
        self._retx_count = 0
        self._retx_timer = None
        self._pending: Optional[tuple[MqttSnMessage, int]] = None  # (msg, size)
        self._queue: deque = deque()
        self.on_publish_done: Callable[[tuple[int, int], bool], None] | None = None
        ip.on_packet = self._on_packet

    def next_msg_id(self) -> int:
        self._msg_id = (self._msg_id + 1) & 0xFFFF or 1
        return self._msg_id

    # -- bootstrap ----------------------------------------------------------

    def bootstrap(self) -> None:
        """CONNECT/CONNACK then REGISTER/REGACK, each under the 2 s x 4 policy."""
        self.state = self.STATE_CONNECTING
        self._control(MqttSnMessage(mtype=CONNECT, client=self.node),
                      wire_bytes(CONNECT_BYTES))

    def _control(self, msg: MqttSnMessage, size: int) -> None:
        self._pending = (msg, size)
        self._retx_count = 0
        self._send(msg, size)
        self._arm(size)

    def _send(self, msg: MqttSnMessage, size: int) -> None:
        packet = IpPacket(src=self.node, dst=self.broker, kind=tr.F_MQTTSN,
                          bytes=size, app_bytes=msg.payload_bytes, item=msg.item,
                          msg=msg)
        self.ip.send(packet)

    def _arm(self, size: int) -> None:
        if self._retx_timer is not None:
            self.kernel.cancel(self._retx_timer)
        self._retx_timer = self.kernel.schedule(RETX_PERIOD_US,
                                                lambda: self._retx(size))

    def _retx(self, size: int) -> None:
        if self._pending is None:
            return
        msg, _ = self._pending
        if self._retx_count >= MAX_RETX:
            self._pending = None
            self.trace.emit(t=self.kernel.now, node=self.node, kind=tr.EXPIRE,
                            frame=tr.F_MQTTSN, item=msg.item, info="exchange-timeout")
            if msg.mtype == PUBLISH:
                if self.on_publish_done is not None:
                    self.on_publish_done(msg.item, False)
                self._next_publish()
            else:
                # bootstrap timeout: retry the cycle from CONNECT
                self.state = self.STATE_DISCONNECTED
                self.kernel.schedule(0, self.bootstrap)
            return
        self._retx_count += 1
        msg.dup = True
        self._send(msg, size)
        self._arm(size)

    # -- publishing -----------------------------------------------------------

    def publish(self, item: tuple[int, int], payload_bytes: int) -> None:
        size = wire_bytes(PUBLISH_HEADER_BYTES + payload_bytes)
        if self.qos == 0:
            if self.state != self.STATE_ACTIVE:
                self.trace.emit(t=self.kernel.now, node=self.node, kind=tr.L3_DROP,
                                frame=tr.F_MQTTSN, item=item, info="not-active")
                return
            msg = MqttSnMessage(mtype=PUBLISH, topic_id=self.topic_id or 0,
                                qos=0, payload_bytes=payload_bytes, item=item,
                                client=self.node)
            self._send(msg, size)
            return
        if len(self._queue) >= self.queue_cap:
            self.trace.emit(t=self.kernel.now, node=self.node, kind=tr.L3_DROP,
                            frame=tr.F_MQTTSN, item=item, info="queue-full")
            return
        self._queue.append((item, payload_bytes))
        if self.state == self.STATE_ACTIVE and self._pending is None:
            self._next_publish()

    def _next_publish(self) -> None:
        if self._pending is not None or not self._queue:
            return
        if self.state != self.STATE_ACTIVE:
            return
        item, payload_bytes = self._queue.popleft()
        msg = MqttSnMessage(mtype=PUBLISH, topic_id=self.topic_id or 0,
                            msg_id=self.next_msg_id(), qos=1,
                            payload_bytes=payload_bytes, item=item,
                            client=self.node)
        self._control(msg, wire_bytes(PUBLISH_HEADER_BYTES + payload_bytes))

    # -- receive ----------------------------------------------------------------

    def _on_packet(self, packet: IpPacket) -> None:
        msg: MqttSnMessage = packet.msg
        if msg.mtype == CONNACK and self.state == self.STATE_CONNECTING:
            self._clear_pending()
            self.state = self.STATE_REGISTERING
            self._control(MqttSnMessage(mtype=REGISTER, client=self.node),
                          wire_bytes(REGISTER_BYTES))
        elif msg.mtype == REGACK and self.state == self.STATE_REGISTERING:
            self._clear_pending()
            self.topic_id = msg.topic_id
            self.state = self.STATE_ACTIVE
            self._next_publish()
        elif msg.mtype == PUBACK:
            if (self._pending is not None
                    and self._pending[0].mtype == PUBLISH
                    and self._pending[0].msg_id == msg.msg_id):
                item = self._pending[0].item
                self._clear_pending()
                if self.on_publish_done is not None:
                    self.on_publish_done(item, True)
                self._next_publish()

    def _clear_pending(self) -> None:
        self._pending = None
        if self._retx_timer is not None:
            self.kernel.cancel(self._retx_timer)
            self._retx_timer = None


class MqttBroker:
    """Sink-side broker: sessions, topic registry, dedup, local delivery."""

    def __init__(self, kernel: Kernel, ip: IpStack, node: int, trace: tr.Trace):
        self.kernel = kernel
        self.ip = ip
        self.node = node
        self.trace = trace
        self.sessions: set[int] = set()
        self.topic_ids: dict[int, int] = {}  # client -> topic_id
        self._next_topic = 0
        self._seen: dict[int, deque] = {}
        self.on_deliver: Callable[[tuple[int, int], int, int], None] | None = None
        ip.on_packet = self._on_packet

    def _reply(self, client: int, msg: MqttSnMessage, size: int) -> None:
        packet = IpPacket(src=self.node, dst=client, kind=tr.F_MQTTSN,
                          bytes=size, msg=msg)
        self.ip.send(packet)

    def _on_packet(self, packet: IpPacket) -> None:
        msg: MqttSnMessage = packet.msg
        client = msg.client
        if msg.mtype == CONNECT:
            self.sessions.add(client)
            self._reply(client, MqttSnMessage(mtype=CONNACK, client=self.node),
                        wire_bytes(CONNACK_BYTES))
        elif msg.mtype == REGISTER:
            # idempotent: the same client always gets the same topic id
            if client not in self.topic_ids:
                self._next_topic += 1
                self.topic_ids[client] = self._next_topic
            self._reply(client, MqttSnMessage(mtype=REGACK, client=self.node,
                                              topic_id=self.topic_ids[client]),
                        wire_bytes(REGACK_BYTES))
        elif msg.mtype == PUBLISH:
            self.broker_dispatch(msg)

    def broker_dispatch(self, msg: MqttSnMessage) -> None:
        client = msg.client
        if msg.topic_id == 0 or self.topic_ids.get(client) != msg.topic_id:
            self.trace.emit(t=self.kernel.now, node=self.node, kind=tr.L3_DROP,
                            frame=tr.F_MQTTSN, item=msg.item, info="bad-topic")
            return
        if msg.qos == 0:
            if self.on_deliver is not None:
                self.on_deliver(msg.item, client, msg.payload_bytes)
            return
        seen = self._seen.setdefault(client, deque(maxlen=DEDUP_WINDOW))
        if msg.msg_id not in seen:
            seen.append(msg.msg_id)
            if self.on_deliver is not None:
                self.on_deliver(msg.item, client, msg.payload_bytes)
        self._reply(client, MqttSnMessage(mtype=PUBACK, client=self.node,
                                          msg_id=msg.msg_id),
                    wire_bytes(PUBACK_BYTES))
