"""Photometric world model and the LDR sensing chain.

Light reaching a sensor is a linear superposition of scaled daylight and
each lamp's full-output contribution times its dim fraction. A sensor
node sees that illuminance only through its LDR divider and ADC.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Mapping, Sequence

VCC = 5.0
LUX_FLOOR = 0.01
LUX_CEIL = 100_000.0
DAY_SECONDS = 86_400.0

# Work-plane targets for typical tasks.
TARGET_LUX_PRESETS = {
    "filing": 300.0,
    "general_office": 500.0,
    "fine_painting": 750.0,
    "precision_assembly": 1000.0,
}


class DomainError(ValueError):
    """Input outside the domain of a transfer function."""


@dataclass(frozen=True)
class Sensor:
    id: int
    daylight_gain: float = 1.0


@dataclass(frozen=True)
class Lamp:
    id: int
    p_max: float = 40.0


@dataclass(frozen=True)
class Room:
    sensors: tuple[Sensor, ...]
    lamps: tuple[Lamp, ...]
    # coupling[i][j]: lux at sensors[i] from lamps[j] at full output
    coupling: tuple[tuple[float, ...], ...]

    def sensor_index(self, sensor_id: int) -> int:
        for i, s in enumerate(self.sensors):
            if s.id == sensor_id:
                return i
        raise KeyError(f"unknown sensor id {sensor_id}")

    def lamp_index(self, lamp_id: int) -> int:
        for j, lamp in enumerate(self.lamps):
            if lamp.id == lamp_id:
                return j
        raise KeyError(f"unknown lamp id {lamp_id}")

    def coupling_of(self, sensor_id: int, lamp_id: int) -> float:
        return self.coupling[self.sensor_index(sensor_id)][self.lamp_index(lamp_id)]


@dataclass(frozen=True)
class LdrCircuit:
    r1_kohm: float = 10.0
    adc_bits: int = 10
    vcc: float = VCC

    @property
    def adc_max(self) -> int:
        return (1 << self.adc_bits) - 1


@dataclass(frozen=True)
class DaylightProfile:
    """Piecewise-constant ambient lux over the 24 h day.

    ``breakpoints`` holds (second_of_day, lux) pairs sorted by time; the
    first one must be at 0 so the whole day is covered.
    """

    breakpoints: tuple[tuple[float, float], ...] = ((0.0, 0.0),)
    day_hours: float = 6.0
    night_hours: float = 6.0
    _times: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_times", tuple(t for t, _ in self.breakpoints))

    def ambient(self, second_of_day: float) -> float:
        i = bisect_right(self._times, second_of_day % DAY_SECONDS) - 1
        return self.breakpoints[max(i, 0)][1]


def ldr_resistance(lux: float) -> float:
    """LDR resistance in kOhm: 500 / lux, lux clamped to a safe range."""
    lux = min(max(lux, LUX_FLOOR), LUX_CEIL)
    return 500.0 / lux


def divider_voltage(r_ldr_kohm: float, r1_kohm: float) -> float:
    """Voltage across the LDR in a divider fed from 5 V through R1."""
    if r_ldr_kohm <= 0 or r1_kohm <= 0:
        raise DomainError("resistances must be positive")
    return VCC * r_ldr_kohm / (r_ldr_kohm + r1_kohm)


def voltage_to_lux(vo: float, r1_kohm: float) -> float:
    """Invert the divider and LDR law to recover lux from the LDR voltage.

    From Vo = 5 R_L / (R_L + R1) and R_L = 500 / lux:
    lux = (2500 - 500 Vo) / (Vo R1).
    """
    if not 0.0 < vo < VCC:
        raise DomainError(f"divider voltage must lie in (0, 5), got {vo}")
    return (2500.0 - 500.0 * vo) / (vo * r1_kohm)


def adc_sample(vo: float, adc_bits: int = 10) -> int:
    """Quantize a 0..5 V input, rounding half away from zero."""
    if not 0.0 <= vo <= VCC:
        raise DomainError(f"ADC input must lie in [0, 5], got {vo}")
    return math.floor(vo / VCC * ((1 << adc_bits) - 1) + 0.5)


def code_to_voltage(code: int, adc_bits: int = 10) -> float:
    return code * VCC / ((1 << adc_bits) - 1)


def sense_lux(true_lux: float, circuit: LdrCircuit) -> float:
    """Lux as a sensor node reconstructs it from its ADC reading.

    Codes at the rails are pulled one step inward so the inverse stays
    defined (full-scale dark or blinding light both saturate).
    """
    vo = divider_voltage(ldr_resistance(true_lux), circuit.r1_kohm)
    code = adc_sample(vo, circuit.adc_bits)
    code = min(max(code, 1), circuit.adc_max - 1)
    return voltage_to_lux(code_to_voltage(code, circuit.adc_bits), circuit.r1_kohm)


def illuminance_at(
    room: Room,
    sensor_id: int,
    levels: Mapping[int, float] | Sequence[float],
    ambient: float,
) -> float:
    """Work-plane lux at a sensor.

    ``levels`` gives each lamp's dim fraction in [0, 1], either as a
    mapping keyed by lamp id or as a sequence in ``room.lamps`` order.
    """
    i = room.sensor_index(sensor_id)
    row = room.coupling[i]
    if isinstance(levels, Mapping):
        fractions = [levels.get(lamp.id, 0.0) for lamp in room.lamps]
    else:
        fractions = list(levels)
    for f in fractions:
        if not 0.0 <= f <= 1.0:
            raise DomainError(f"dim fraction out of [0, 1]: {f}")
    lux = ambient * room.sensors[i].daylight_gain
    for c, f in zip(row, fractions):
        lux += c * f
    return lux


def lamp_power(level_fraction: float, p_max: float) -> float:
    if not 0.0 <= level_fraction <= 1.0:
        raise DomainError(f"dim fraction out of [0, 1]: {level_fraction}")
    return p_max * level_fraction
