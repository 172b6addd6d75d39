"""CoAP messaging layer (CON/NON/ACK, message IDs, end-to-end retransmission)
plus the PUT, GET, and Observe endpoint behaviors.

All exchanges follow the aligned retransmission strategy: a confirmable
message is retransmitted every 2 s, at most 4 times, then the exchange times
out.  Clients hold a small fixed pool of concurrent confirmable exchanges
(as constrained-node implementations do); a publish arriving while the pool
is full is rejected at the source.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable, Optional

from . import trace as tr
from .ip import IP_UDP_OVERHEAD_BYTES, IpPacket, IpStack
from .kernel import Kernel, SEC

CON, NON, ACK = "CON", "NON", "ACK"

BASE_HEADER_BYTES = 4
TOKEN_BYTES = 2
URI_OPTION_BYTES = 10
OBSERVE_OPTION_BYTES = 2

RETX_PERIOD_US = 2 * SEC
MAX_RETX = 4
DEDUP_WINDOW = 32


def request_bytes(payload_bytes: int = 0, observe: bool = False) -> int:
    size = BASE_HEADER_BYTES + TOKEN_BYTES + URI_OPTION_BYTES + payload_bytes
    if observe:
        size += OBSERVE_OPTION_BYTES
    return IP_UDP_OVERHEAD_BYTES + size


def response_bytes(payload_bytes: int = 0, observe: bool = False) -> int:
    size = BASE_HEADER_BYTES + TOKEN_BYTES + payload_bytes
    if observe:
        size += OBSERVE_OPTION_BYTES
    return IP_UDP_OVERHEAD_BYTES + size


def empty_ack_bytes() -> int:
    return IP_UDP_OVERHEAD_BYTES + BASE_HEADER_BYTES + TOKEN_BYTES


@dataclass(slots=True)
class CoapMessage:
    mtype: str  # CON | NON | ACK
    code: str  # GET | PUT | 2.05
    mid: int
    token: int
    uri: int  # producer resource path
    observe: Optional[int] = None
    payload_bytes: int = 0
    item: Optional[tuple[int, int]] = None
    pub_t: Optional[int] = None


class ExchangeState:
    __slots__ = ("msg", "peer", "retx_count", "timer", "on_done", "first_send")

    def __init__(self, msg: CoapMessage, peer: int, on_done):
        self.msg = msg
        self.peer = peer
        self.retx_count = 0
        self.timer = None
        self.on_done = on_done
        self.first_send = 0


class CoapEndpoint:
    """Client and server roles of one node's CoAP engine."""

    def __init__(self, kernel: Kernel, ip: IpStack, node: int, trace: tr.Trace,
                 exchange_slots: int = 2):
        self.kernel = kernel
        self.ip = ip
        self.node = node
        self.trace = trace
        self.exchange_slots = exchange_slots
        self._mid = 0
        self._token = 0
        self.exchanges: dict[tuple[int, int], ExchangeState] = {}
        self._dedup: dict[int, deque] = {}
        # server side
        self.resource_latest: Optional[tuple[tuple[int, int], int, int]] = None
        self.observers: dict[int, tuple[int, int]] = {}  # observer -> (token, counter)
        self.on_request: Callable[[CoapMessage, int, bool], Optional[CoapMessage]] | None = None
        self.on_response: Callable[[CoapMessage, int], None] | None = None
        ip.on_packet = self._on_packet

    def next_mid(self) -> int:
        self._mid = (self._mid + 1) & 0xFFFF
        return self._mid

    def next_token(self) -> int:
        self._token = (self._token + 1) & 0xFFFF
        return self._token

    # -- sending ------------------------------------------------------------

    def send(self, peer: int, msg: CoapMessage, size: int,
             on_done: Callable[[bool], None] | None = None) -> bool:
        """Send confirmable or non-confirmable per msg.mtype.

        Returns False when a confirmable send is rejected because the
        exchange pool is full.
        """
        if msg.mtype == CON:
            if len(self.exchanges) >= self.exchange_slots:
                self.trace.emit(t=self.kernel.now, node=self.node, kind=tr.L3_DROP,
                                frame=tr.F_COAP, item=msg.item, info="exchange-pool-full")
                if on_done is not None:
                    on_done(False)
                return False
            state = ExchangeState(msg, peer, on_done)
            state.first_send = self.kernel.now
            self.exchanges[(peer, msg.mid)] = state
            self._transmit(peer, msg, size)
            self._arm(state, size)
            return True
        self._transmit(peer, msg, size)
        return True

    def _transmit(self, peer: int, msg: CoapMessage, size: int) -> None:
        packet = IpPacket(src=self.node, dst=peer, kind=tr.F_COAP, bytes=size,
                          app_bytes=msg.payload_bytes, item=msg.item, msg=msg)
        self.ip.send(packet)

    def _arm(self, state: ExchangeState, size: int) -> None:
        fire_at = state.first_send + (state.retx_count + 1) * RETX_PERIOD_US
        state.timer = self.kernel.schedule_at(fire_at, lambda: self._retx(state, size))

    def _retx(self, state: ExchangeState, size: int) -> None:
        key = (state.peer, state.msg.mid)
        if self.exchanges.get(key) is not state:
            return
        if state.retx_count >= MAX_RETX:
            del self.exchanges[key]
            self.trace.emit(t=self.kernel.now, node=self.node, kind=tr.EXPIRE,
                            frame=tr.F_COAP, item=state.msg.item, info="exchange-timeout")
            if state.on_done is not None:
                state.on_done(False)
            return
        state.retx_count += 1
        self._transmit(state.peer, state.msg, size)
        self._arm(state, size)

    # -- receiving ----------------------------------------------------------

    def _on_packet(self, packet: IpPacket) -> None:
        msg: CoapMessage = packet.msg
        if msg.mtype == ACK or (msg.mtype == NON and msg.code == "2.05"):
            self._on_response(msg, packet.src)
        else:
            self._on_request_msg(msg, packet.src)

    def _on_response(self, msg: CoapMessage, peer: int) -> None:
        state = self.exchanges.pop((peer, msg.mid), None) if msg.mtype == ACK else None
        if state is not None:
            if state.timer is not None:
                self.kernel.cancel(state.timer)
            if state.on_done is not None:
                state.on_done(True)
        if self.on_response is not None:
            self.on_response(msg, peer)

    def _on_request_msg(self, msg: CoapMessage, peer: int) -> None:
        seen = self._dedup.setdefault(peer, deque(maxlen=DEDUP_WINDOW))
        duplicate = msg.mid in seen
        if not duplicate:
            seen.append(msg.mid)
        response = (self.on_request(msg, peer, duplicate)
                    if self.on_request is not None else None)
        if msg.mtype == CON:
            if response is not None:
                response.mid = msg.mid
                response.mtype = ACK
                size = response_bytes(response.payload_bytes,
                                      observe=response.observe is not None)
                self._transmit(peer, response, size)
            else:
                ack = CoapMessage(mtype=ACK, code="0.00", mid=msg.mid,
                                  token=msg.token, uri=msg.uri)
                self._transmit(peer, ack, empty_ack_bytes())
        elif response is not None:
            response.mtype = NON
            size = response_bytes(response.payload_bytes,
                                  observe=response.observe is not None)
            self._transmit(peer, response, size)
