"""Built-in scenarios.

``table2`` is the five-lamp office: four corner lamps shared pairwise by
two window-side sensors, and a middle lamp over an interior sensor. The
lamps burn from noon to midnight; daylight covers the first six of those
hours. Couplings are chosen so the corner pairs settle at half output in
daylight and at full output after dark, while the middle lamp, which no
sensor sees change enough to claim, stays at full output throughout.
"""

from __future__ import annotations

import dataclasses

from .nodes.common import ProtocolParams
from .plant import DaylightProfile, Lamp, Room, Sensor
from .radio import ChannelParams
from .scenario import NodeSpec, Scenario

DAYS_30 = 30 * 86_400.0

_CORNER = 195.0
_WINDOW_AMBIENT = 450.0
_WINDOW_GAIN = 0.5


def _office_room() -> Room:
    return Room(
        sensors=(Sensor(1, _WINDOW_GAIN), Sensor(2, _WINDOW_GAIN), Sensor(3, 0.0)),
        lamps=tuple(Lamp(i, 40.0) for i in range(1, 6)),
        coupling=(
            (_CORNER, _CORNER, 0.0, 0.0, 0.0),
            (0.0, 0.0, _CORNER, _CORNER, 0.0),
            (0.0, 0.0, 0.0, 0.0, 400.0),
        ),
    )


def _daylight() -> DaylightProfile:
    return DaylightProfile(
        breakpoints=((0.0, 0.0), (6 * 3600.0, _WINDOW_AMBIENT), (18 * 3600.0, 0.0)),
    )


def table2(duration: float = DAYS_30, seed: int = 0) -> Scenario:
    return Scenario(
        room=_office_room(),
        daylight=_daylight(),
        channel=ChannelParams(),
        mn=NodeSpec(1),
        sns=[NodeSpec(i) for i in range(1, 4)],
        lcns=[NodeSpec(i) for i in range(1, 6)],
        protocol=ProtocolParams(
            target_lux=400.0,
            deadband_lux=40.0,
            expected_lcns=5,
            expected_sns=3,
        ),
        duration=duration,
        seed=seed,
        start_hour=12.0,
        lit_hours=((12.0, 24.0),),
        name="table2",
    )


def two_coupling(duration: float = 300.0, seed: int = 0, p_loss: float = 0.0) -> Scenario:
    """Every sensor sees exactly two lamps strongly, plus faint strays."""
    room = Room(
        sensors=(Sensor(1, 0.5), Sensor(2, 0.5), Sensor(3, 0.4)),
        lamps=tuple(Lamp(i, 40.0) for i in range(1, 6)),
        coupling=(
            (195.0, 195.0, 4.0, 0.0, 2.0),
            (0.0, 3.0, 195.0, 195.0, 4.0),
            (2.0, 0.0, 3.0, 150.0, 300.0),
        ),
    )
    return Scenario(
        room=room,
        daylight=DaylightProfile(((0.0, _WINDOW_AMBIENT),)),
        channel=ChannelParams(p_loss=p_loss),
        mn=NodeSpec(1),
        sns=[NodeSpec(i) for i in range(1, 4)],
        lcns=[NodeSpec(i) for i in range(1, 6)],
        protocol=ProtocolParams(deadband_lux=40.0, expected_lcns=5, expected_sns=3),
        duration=duration,
        seed=seed,
        name="two_coupling",
    )


def churn(duration: float = 1500.0, seed: int = 0) -> Scenario:
    """Office in steady daylight; LCN 2 dies and a sensor near lamp 3 joins mid-run."""
    base = table2(duration=duration, seed=seed)
    room = base.room
    room = dataclasses.replace(
        room,
        sensors=room.sensors + (Sensor(4, 0.0),),
        coupling=room.coupling + ((0.0, 0.0, 700.0, 0.0, 0.0),),
    )
    mid = duration / 2
    lcns = [NodeSpec(i, kill_at=mid if i == 2 else None) for i in range(1, 6)]
    sns = base.sns + [NodeSpec(4, join_at=mid)]
    return base.replace(
        room=room,
        daylight=DaylightProfile(((0.0, _WINDOW_AMBIENT),)),
        lcns=lcns,
        sns=sns,
        lit_hours=((0.0, 24.0),),
        start_hour=0.0,
        name="churn",
    )


BUILTIN = {"table2": table2, "two_coupling": two_coupling, "churn": churn}
