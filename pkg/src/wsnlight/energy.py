"""Energy accounting: exact piecewise-constant integration of lamp power.

Lamp power only changes at discrete events (dim commands, lighting
schedule edges), so integrating between samples is exact.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple

from .errors import ValidationError
from .plant import Room

DAYS_PER_MONTH = 30
SECONDS_PER_HOUR = 3600.0


class PowerSample(NamedTuple):
    t: float
    lamp: int
    watts: float


@dataclass
class EnergyReport:
    per_lamp_wh: dict[int, float] = field(default_factory=dict)
    total_wh_day: float = 0.0
    total_wh_month: float = 0.0
    baseline_wh_day: float = 0.0
    baseline_wh_month: float = 0.0
    savings_wh_month: float = 0.0
    days: float = 0.0

    def as_items(self) -> list[tuple[str, str]]:
        items = [
            ("days", _num(self.days)),
            ("total_wh_day", _num(self.total_wh_day)),
            ("total_wh_month", _num(self.total_wh_month)),
            ("baseline_wh_day", _num(self.baseline_wh_day)),
            ("baseline_wh_month", _num(self.baseline_wh_month)),
            ("savings_wh_month", _num(self.savings_wh_month)),
        ]
        for lamp in sorted(self.per_lamp_wh):
            items.append((f"lamp_{lamp}_wh", _num(self.per_lamp_wh[lamp])))
        return items

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in self.as_items())

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["lamp", "wh_total", "wh_day", "wh_month"])
        days = self.days or 1.0
        for lamp in sorted(self.per_lamp_wh):
            wh = self.per_lamp_wh[lamp]
            writer.writerow([lamp, _num(wh), _num(wh / days), _num(wh / days * DAYS_PER_MONTH)])
        writer.writerow(
            ["total", _num(self.total_wh_day * self.days), _num(self.total_wh_day),
             _num(self.total_wh_month)]
        )
        writer.writerow(["baseline", "", _num(self.baseline_wh_day), _num(self.baseline_wh_month)])
        writer.writerow(["savings", "", "", _num(self.savings_wh_month)])
        return buf.getvalue()


def _num(x: float) -> str:
    return f"{x:.6f}"


def integrate(power_trace: Iterable[PowerSample], horizon: float) -> dict[int, float]:
    """Watt-hours per lamp from a time-ordered power trace.

    Each sample sets a lamp's power from its time until the lamp's next
    sample or ``horizon``. A lamp draws nothing before its first sample.
    """
    segments: dict[int, list[float]] = {}
    current: dict[int, tuple[float, float]] = {}
    last_t = -math.inf
    for sample in power_trace:
        t, lamp, watts = sample
        if t < last_t:
            raise ValidationError(f"power trace out of order at t={t} (after {last_t})")
        if t > horizon:
            raise ValidationError(f"sample at t={t} beyond horizon {horizon}")
        last_t = t
        if lamp in current:
            t0, w0 = current[lamp]
            segments[lamp].append(w0 * (t - t0))
        else:
            segments[lamp] = []
        current[lamp] = (t, watts)
    for lamp, (t0, w0) in current.items():
        segments[lamp].append(w0 * (horizon - t0))
    return {lamp: math.fsum(parts) / SECONDS_PER_HOUR for lamp, parts in segments.items()}


def baseline(room: Room, occupied_hours_per_day: float) -> tuple[float, float]:
    """Always-full-brightness energy: (Wh/day, Wh/month)."""
    if not 0.0 <= occupied_hours_per_day <= 24.0:
        raise ValueError("occupied hours must be within [0, 24]")
    day = math.fsum(lamp.p_max * occupied_hours_per_day for lamp in room.lamps)
    return day, day * DAYS_PER_MONTH


def compare(actual: float, reference: float) -> float:
    """Savings of ``actual`` against ``reference`` over the same period."""
    return reference - actual


def build_report(
    per_lamp_wh: Mapping[int, float],
    horizon: float,
    room: Room,
    occupied_hours_per_day: float,
) -> EnergyReport:
    days = horizon / 86_400.0
    total = math.fsum(per_lamp_wh.values())
    day = total / days if days > 0 else 0.0
    month = day * DAYS_PER_MONTH
    base_day, base_month = baseline(room, occupied_hours_per_day)
    return EnergyReport(
        per_lamp_wh=dict(per_lamp_wh),
        total_wh_day=day,
        total_wh_month=month,
        baseline_wh_day=base_day,
        baseline_wh_month=base_month,
        savings_wh_month=compare(month, base_month),
        days=days,
    )


def table2_arithmetic(
    lamps: int = 5,
    p_max: float = 40.0,
    day_hours: float = 6.0,
    night_hours: float = 6.0,
    dimmed_lamps: int = 4,
    day_fraction: float = 0.5,
) -> dict[str, float]:
    """Closed-form day/night energy of the five-lamp room.

    Builds the three constant power traces (dimmed lamps by day, the
    undimmed lamp by day, every lamp by night) and integrates them.
    """
    day_s = day_hours * SECONDS_PER_HOUR
    night_s = night_hours * SECONDS_PER_HOUR
    dimmed = integrate([PowerSample(0.0, i, p_max * day_fraction) for i in range(dimmed_lamps)], day_s)
    full_day = integrate(
        [PowerSample(0.0, i, p_max) for i in range(dimmed_lamps, lamps)], day_s
    )
    night = integrate([PowerSample(0.0, i, p_max) for i in range(lamps)], night_s)
    proposed_day = math.fsum(dimmed.values()) + math.fsum(full_day.values()) + math.fsum(night.values())
    normal_day = lamps * p_max * (day_hours + night_hours)
    return {
        "normal_wh_day": normal_day,
        "normal_wh_month": normal_day * DAYS_PER_MONTH,
        "dimmed_day_wh": math.fsum(dimmed.values()),
        "full_day_wh": math.fsum(full_day.values()),
        "night_wh": math.fsum(night.values()),
        "proposed_wh_day": proposed_day,
        "proposed_wh_month": proposed_day * DAYS_PER_MONTH,
        "savings_wh_month": compare(proposed_day * DAYS_PER_MONTH, normal_day * DAYS_PER_MONTH),
    }
