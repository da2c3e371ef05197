"""Sensor node: registers with the master, then asks for more or less light."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

from ..frame import BROADCAST, UNASSIGNED, Frame, FrameKind, mn_address
from .common import (
    Action,
    Boot,
    Event,
    FrameRx,
    ProtocolParams,
    Send,
    SenseTick,
    drop,
    note,
)


@dataclass
class SensorNode:
    id: int
    params: ProtocolParams = field(default_factory=ProtocolParams)
    target_lux: float | None = None
    deadband_lux: float | None = None
    tx_dest: int = UNASSIGNED
    registered: bool = False
    last_request: str | None = None
    last_request_t: float | None = None

    def __post_init__(self) -> None:
        if not 1 <= self.id <= 15:
            raise ValueError(f"SN id must be in 1..15, got {self.id}")
        if self.target_lux is None:
            self.target_lux = self.params.target_lux
        if self.deadband_lux is None:
            self.deadband_lux = self.params.deadband_lux

    def handle(self, event: Event) -> list[Action]:
        if isinstance(event, Boot):
            return []
        if isinstance(event, SenseTick):
            return self._on_sense(event)
        if isinstance(event, FrameRx):
            return self._on_frame(event)
        return []

    def _on_frame(self, event: FrameRx) -> list[Action]:
        frame = event.frame
        if frame.kind is FrameKind.MN_BCAST:
            if frame.nibble == 0:
                return drop("master index 0", frame)
            actions: list[Action] = []
            if not self.registered:
                actions.append(note("registered with master"))
            self.tx_dest = mn_address(frame.nibble)
            self.registered = True
            # answer in an ID-keyed slot so sensors never reply in unison
            actions.append(
                Send(self.tx_dest, Frame(FrameKind.SN_ACK, self.id), delay=self.id * self.params.ack_slot)
            )
            return actions
        if frame.kind is FrameKind.TOPO_PING and event.dest == BROADCAST:
            if frame.nibble != self.id:
                return drop("ping for another id", frame)
            if not self.registered:
                return drop("not registered", frame)
            return [Send(self.tx_dest, Frame(FrameKind.TOPO_PONG, self.id))]
        return drop("not for an SN", frame)

    def _on_sense(self, event: SenseTick) -> list[Action]:
        if not self.registered:
            return []
        if (
            self.last_request_t is not None
            and event.t - self.last_request_t < self.params.sense_period * (1 - 1e-9)
        ):
            return []
        lux = event.measured_lux
        if lux < self.target_lux - self.deadband_lux:
            kind, what = FrameKind.SN_REQ_INC, "inc"
        elif lux > self.target_lux + self.deadband_lux:
            kind, what = FrameKind.SN_REQ_DEC, "dec"
        else:
            return []
        self.last_request, self.last_request_t = what, event.t
        return [Send(self.tx_dest, Frame(kind, self.id))]


def sn_handle(state: SensorNode, event: Event) -> tuple[SensorNode, list[Action]]:
    nxt = copy.deepcopy(state)
    return nxt, nxt.handle(event)
