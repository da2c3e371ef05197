"""Events fed to the node state machines and the actions they return."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from ..frame import Frame


@dataclass(frozen=True)
class ProtocolParams:
    # phase timers (s)
    p1_timer: float = 10.0
    p2_timer: float = 10.0
    p2_rebroadcast: float = 2.0
    p3_window: float = 20.0
    # topology maintenance
    audit_period: float = 60.0
    audit_window: float = 1.0
    eviction_misses: int = 3
    lcn_watchdog_audits: float = 3.5
    # control law
    sense_period: float = 1.0
    target_lux: float = 400.0
    deadband_lux: float = 20.0
    step: int = 1
    levels: int = 10
    initial_level: int = 5
    debounce: int = 5
    # commissioning plumbing
    hello_backoff: tuple[float, float] = (0.5, 2.0)
    handshake_timeout: float = 0.25
    handshake_retries: int = 6
    handshake_rounds: int = 3
    addr_window: float = 0.1
    command_repeats: int = 4
    repeat_gap: float = 0.35  # spacing of repeats; outlasts a full round of sensor ack slots
    ack_slot: float = 0.02
    tx_gap: float = 0.01
    # installer-declared roster sizes; None means the full 4-bit ID space
    expected_lcns: int | None = None
    expected_sns: int | None = None

    @property
    def settle_time(self) -> float:
        return (self.debounce + 2) * self.sense_period

    @property
    def lcn_watchdog(self) -> float:
        return self.lcn_watchdog_audits * self.audit_period


# --- events ---

@dataclass(frozen=True)
class Boot:
    t: float


@dataclass(frozen=True)
class FrameRx:
    frame: Frame
    dest: int
    t: float


@dataclass(frozen=True)
class TimerFired:
    kind: str
    t: float


@dataclass(frozen=True)
class SenseTick:
    t: float
    measured_lux: float


Event = Union[Boot, FrameRx, TimerFired, SenseTick]


# --- actions ---

@dataclass(frozen=True)
class Send:
    dest: int
    frame: Frame
    delay: float = 0.0


@dataclass(frozen=True)
class SetDimLevel:
    level: int


@dataclass(frozen=True)
class ArmTimer:
    kind: str
    at: float


@dataclass(frozen=True)
class TraceEvent:
    tag: str  # "drop" for discarded input, "state" otherwise
    detail: str = ""


Action = Union[Send, SetDimLevel, ArmTimer, TraceEvent]


def drop(reason: str, frame: Frame | None = None) -> list[Action]:
    detail = f"{frame} {reason}" if frame is not None else reason
    return [TraceEvent("drop", detail)]


def note(detail: str) -> TraceEvent:
    return TraceEvent("state", detail)


class TimerTable:
    """Per-node timer deadlines; a firing whose time does not match is stale."""

    def __init__(self) -> None:
        self.deadlines: dict[str, float] = {}

    def arm(self, kind: str, at: float) -> ArmTimer:
        self.deadlines[kind] = at
        return ArmTimer(kind, at)

    def take(self, event: TimerFired) -> bool:
        if self.deadlines.get(event.kind) != event.t:
            return False
        del self.deadlines[event.kind]
        return True

    def cancel(self, *kinds: str) -> None:
        for kind in kinds:
            self.deadlines.pop(kind, None)

    def __deepcopy__(self, memo):
        clone = TimerTable()
        clone.deadlines = dict(self.deadlines)
        return clone

    def __eq__(self, other) -> bool:
        return isinstance(other, TimerTable) and self.deadlines == other.deadlines

    def __repr__(self) -> str:
        return f"TimerTable({self.deadlines!r})"
