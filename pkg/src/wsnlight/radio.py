"""Single shared AM channel: range, independent loss, destructive collisions.

There is no capture effect and no carrier sense. A receiver hears a packet
only if it is in range of the sender, its address filter accepts the
destination, an independent loss draw spares it, and no other packet it
can hear overlaps the packet's time on air. A node that is transmitting
hears its own carrier, so it cannot receive at the same time.
"""

from __future__ import annotations

import logging
import math
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .frame import BROADCAST, Frame

log = logging.getLogger(__name__)

FRAME_BITS = 16  # address octet + frame octet


@dataclass(frozen=True)
class ChannelParams:
    data_rate_bps: float = 4000.0
    preamble_bits: int = 8
    range_m: float = 80.0
    p_loss: float = 0.0
    rx_queue_capacity: int = 8
    # metadata only; propagation uses range_m
    power_mw: float = 10.0
    frequency_mhz: float = 433.0

    def problems(self) -> list[tuple[str, str]]:
        out = []
        if not self.data_rate_bps > 0:
            out.append(("data_rate_bps", "must be > 0"))
        if self.preamble_bits < 0:
            out.append(("preamble_bits", "must be >= 0"))
        if not self.range_m > 0:
            out.append(("range_m", "must be > 0"))
        if not 0.0 <= self.p_loss <= 1.0:
            out.append(("p_loss", "must lie in [0, 1]"))
        if self.rx_queue_capacity < 1:
            out.append(("rx_queue_capacity", "must be >= 1"))
        return out


def on_air_duration(params: ChannelParams) -> float:
    return (params.preamble_bits + FRAME_BITS) / params.data_rate_bps


@dataclass(frozen=True)
class RadioPacket:
    src: str
    dest: int
    frame: Frame
    t_start: float
    t_end: float

    def overlaps(self, other: RadioPacket) -> bool:
        return self.t_start < other.t_end and other.t_start < self.t_end


@dataclass
class ReceiverConfig:
    rx_addr: int = BROADCAST
    capacity: int = 8
    queue: deque = field(default_factory=deque)

    def accepts(self, dest: int) -> bool:
        return dest == BROADCAST or dest == self.rx_addr


def enqueue_rx(config: ReceiverConfig, dest: int, frame: Frame) -> tuple[bool, Frame | None]:
    """Offer a frame to a receiver.

    Returns ``(accepted, evicted)``: frames for another address are not
    enqueued; when the queue is full the oldest entry is evicted.
    """
    if not config.accepts(dest):
        return False, None
    evicted = None
    if len(config.queue) >= config.capacity:
        evicted = config.queue.popleft()
        log.debug("rx queue overflow, dropped %s", evicted)
    config.queue.append(frame)
    return True, evicted


Position = tuple[float, float]


def in_range(a: Position | None, b: Position | None, range_m: float) -> bool:
    if a is None or b is None:
        return True
    return math.dist(a, b) <= range_m


def transmit(
    packet: RadioPacket,
    receivers: Mapping[str, ReceiverConfig],
    positions: Mapping[str, Position | None],
    params: ChannelParams,
    rng: random.Random,
    concurrent: Iterable[RadioPacket] = (),
) -> list[tuple[str, Frame]]:
    """Deliveries of ``packet`` at its end time, in receiver-name order.

    ``concurrent`` holds every other packet that may have been on air;
    those overlapping ``packet`` destroy it at any receiver that can hear
    them. One loss draw is made per addressed, in-range receiver so the
    random stream does not depend on collision outcomes.
    """
    src_pos = positions.get(packet.src)
    rivals = [q for q in concurrent if q is not packet and q.overlaps(packet)]
    out = []
    for node in sorted(receivers):
        if node == packet.src:
            continue
        pos = positions.get(node)
        if not in_range(src_pos, pos, params.range_m):
            continue
        if not receivers[node].accepts(packet.dest):
            continue
        lost = params.p_loss > 0.0 and rng.random() < params.p_loss
        if lost:
            continue
        if any(in_range(positions.get(q.src), pos, params.range_m) for q in rivals):
            continue
        out.append((node, packet.frame))
    return out


class Channel:
    """In-flight packet bookkeeping for the event loop."""

    def __init__(self, params: ChannelParams, rng: random.Random) -> None:
        self.params = params
        self.rng = rng
        self.airtime = on_air_duration(params)
        self._air: list[RadioPacket] = []

    def begin(self, src: str, dest: int, frame: Frame, now: float) -> RadioPacket:
        packet = RadioPacket(src, dest, frame, now, now + self.airtime)
        self._air.append(packet)
        return packet

    def busy(self, node: str, now: float) -> bool:
        return any(p.src == node and p.t_start <= now < p.t_end for p in self._air)

    def resolve(
        self,
        packet: RadioPacket,
        receivers: Mapping[str, ReceiverConfig],
        positions: Mapping[str, Position | None],
    ) -> tuple[list[tuple[str, Frame]], bool]:
        """Deliveries for a packet whose air time just ended.

        Also reports whether the packet collided with anything.
        """
        now = packet.t_end
        # keep anything that could still overlap a packet not yet resolved
        horizon = now - self.airtime
        self._air = [p for p in self._air if p.t_end > horizon or p is packet]
        deliveries = transmit(packet, receivers, positions, self.params, self.rng, self._air)
        collided = any(q is not packet and q.overlaps(packet) for q in self._air)
        return deliveries, collided
