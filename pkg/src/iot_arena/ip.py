"""Host-centric forwarding plane shared by CoAP and MQTT-SN.

Intermediate nodes keep routing tables only; all protocol state lives at the
endpoints.  A link-layer failure on any hop silently drops the packet, so
recovery is purely end-to-end.  Without header compression every packet pays
the full IPv6 + UDP header cost.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

from . import trace as tr
from .kernel import Kernel
from .phymac import Frame, Radio
from .topology import DEFAULT_PREFIX

IP_UDP_OVERHEAD_BYTES = 48  # IPv6 40 + UDP 8, uncompressed


@dataclass(slots=True)
class IpPacket:
    src: int
    dst: int
    kind: str  # frame kind label: coap | mqttsn
    bytes: int  # full L2 frame size including IP/UDP overhead
    app_bytes: int = 0
    item: Optional[tuple[int, int]] = None
    msg: object = None


class IpStack:
    """Per-node FIB and hop-by-hop relay; applications sit on ``on_packet``."""

    def __init__(self, kernel: Kernel, radio: Radio, node: int, trace: tr.Trace,
                 fib: dict[int, int], proc_delay_us: int = 1500):
        self.kernel = kernel
        self.radio = radio
        self.node = node
        self.trace = trace
        self.fib = fib
        self.proc_delay_us = proc_delay_us
        self.on_packet: Callable[[IpPacket], None] | None = None

    def send(self, packet: IpPacket) -> None:
        """Originate a packet at this node."""
        self._forward(packet)

    def on_frame(self, frame: Frame, from_node: int) -> None:
        packet: IpPacket = frame.msg
        if packet.dst == self.node:
            self.kernel.schedule(self.proc_delay_us, lambda: self._deliver(packet))
        else:
            self.kernel.schedule(self.proc_delay_us, lambda: self._forward(packet))

    def _deliver(self, packet: IpPacket) -> None:
        if self.on_packet is not None:
            self.on_packet(packet)

    def _forward(self, packet: IpPacket) -> None:
        next_hop = self.fib.get(packet.dst)
        if next_hop is None:
            next_hop = self.fib.get(DEFAULT_PREFIX)
        if next_hop is None:
            self.trace.emit(t=self.kernel.now, node=self.node, kind=tr.L3_DROP,
                            frame=packet.kind, item=packet.item, info="no-route")
            return
        frame = Frame(src=self.node, dst=next_hop, kind=packet.kind,
                      bytes=packet.bytes, app_bytes=packet.app_bytes,
                      item=packet.item, msg=packet)
        self.radio.unicast(frame)
