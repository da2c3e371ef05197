"""Light-control node: a D/A dimmer that obeys the master once addressed."""

from __future__ import annotations

import copy
import random
from dataclasses import dataclass, field

from ..frame import BROADCAST, Frame, FrameKind, lcn_address
from .common import (
    Action,
    Boot,
    Event,
    FrameRx,
    ProtocolParams,
    Send,
    SetDimLevel,
    TimerFired,
    TimerTable,
    drop,
    note,
)

_ADDRESSED = frozenset(
    {
        FrameKind.LCN_STEP_INC,
        FrameKind.LCN_STEP_DEC,
        FrameKind.LCN_SET_MAX,
        FrameKind.LCN_RESTORE,
        FrameKind.TOPO_PING,
    }
)


@dataclass
class LightController:
    id: int
    params: ProtocolParams = field(default_factory=ProtocolParams)
    rng: random.Random = field(default_factory=random.Random)
    rx_addr: int = BROADCAST
    commissioned: bool = False
    level: int = 0
    saved_level: int = 0
    holding_max: bool = False
    echo_at: float | None = None
    timers: TimerTable = field(default_factory=TimerTable)

    def __post_init__(self) -> None:
        if not 1 <= self.id <= 15:
            raise ValueError(f"LCN id must be in 1..15, got {self.id}")

    @property
    def max_level(self) -> int:
        return self.params.levels

    def _backoff(self) -> float:
        lo, hi = self.params.hello_backoff
        return self.rng.uniform(lo, hi)

    def handle(self, event: Event) -> list[Action]:
        if isinstance(event, Boot):
            self.level = self.params.initial_level
            self.saved_level = self.level
            return [SetDimLevel(self.level), self.timers.arm("hello", event.t + self._backoff())]
        if isinstance(event, TimerFired):
            return self._on_timer(event)
        if isinstance(event, FrameRx):
            return self._on_frame(event)
        raise TypeError(f"LCN cannot handle {event!r}")

    def _on_timer(self, event: TimerFired) -> list[Action]:
        if not self.timers.take(event):
            return []
        if event.kind == "hello":
            if self.commissioned:
                return []
            return [
                Send(BROADCAST, Frame(FrameKind.LCN_HELLO, self.id)),
                self.timers.arm("hello", event.t + self._backoff()),
            ]
        if event.kind == "watchdog" and self.commissioned:
            # master has gone quiet on us: start over as a new node
            self.commissioned = False
            self.rx_addr = BROADCAST
            self.holding_max = False
            return [
                note("watchdog expired, decommissioned"),
                self.timers.arm("hello", event.t + self._backoff()),
            ]
        return []

    def _on_frame(self, event: FrameRx) -> list[Action]:
        frame, kind, t = event.frame, event.frame.kind, event.t
        if kind is FrameKind.MN_ID_ECHO:
            if frame.nibble != self.id:
                return drop("echo for another node", frame)
            self.echo_at = t
            return [note("echo matched, awaiting address")]
        if kind is FrameKind.MN_ADDR_SET:
            return self._on_addr_set(frame, t)
        if kind in _ADDRESSED:
            if not self.commissioned or event.dest != self.rx_addr:
                return drop("not addressed to this node", frame)
            actions = self._on_command(frame)
            if frame.kind is FrameKind.TOPO_PING and frame.nibble != self.id:
                return actions
            actions.append(self.timers.arm("watchdog", t + self.params.lcn_watchdog))
            return actions
        return drop("not for an LCN", frame)

    def _on_addr_set(self, frame: Frame, t: float) -> list[Action]:
        if self.echo_at is None or t - self.echo_at > self.params.addr_window:
            return drop("no matching echo", frame)
        if frame.nibble == 0:
            return drop("address index 0", frame)
        self.echo_at = None
        self.rx_addr = lcn_address(frame.nibble)
        self.commissioned = True
        self.timers.cancel("hello")
        return [
            note(f"rx address set to 0x{self.rx_addr:02X}"),
            Send(BROADCAST, Frame(FrameKind.LCN_ADDR_ACK, frame.nibble)),
            self.timers.arm("watchdog", t + self.params.lcn_watchdog),
        ]

    def _on_command(self, frame: Frame) -> list[Action]:
        kind, k = frame.kind, self.max_level
        if kind is FrameKind.TOPO_PING:
            if frame.nibble != self.id:
                return drop("ping for another id", frame)
            return [Send(BROADCAST, Frame(FrameKind.TOPO_PONG, self.id))]
        if kind is FrameKind.LCN_SET_MAX:
            if not self.holding_max:
                self.saved_level = self.level
                self.holding_max = True
                return self._set(k, "hold at max")
            return self._set(k, "already at max")
        if kind is FrameKind.LCN_RESTORE:
            if not self.holding_max:
                return [note("restore ignored, not holding")]
            self.holding_max = False
            return self._set(self.saved_level, "restored")
        self.holding_max = False
        if kind is FrameKind.LCN_STEP_INC:
            return self._set(min(self.level + frame.nibble, k), "step up")
        return self._set(max(self.level - frame.nibble, 0), "step down")

    def _set(self, level: int, why: str) -> list[Action]:
        if level == self.level:
            return [note(f"{why}, level stays {level}")]
        self.level = level
        return [SetDimLevel(level)]


def lcn_handle(state: LightController, event: Event) -> tuple[LightController, list[Action]]:
    """Pure transition: returns a new state and the actions, leaving ``state`` intact."""
    nxt = copy.deepcopy(state)
    return nxt, nxt.handle(event)
