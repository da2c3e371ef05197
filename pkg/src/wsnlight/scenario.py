"""Scenario description, YAML loading, validation and built-in presets.

A scenario file has the sections ``room``, ``ldr``, ``daylight``,
``channel``, ``nodes``, ``protocol`` and ``run``. Times of day are in
hours, everything else in SI units (seconds, lux, watts, metres).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .errors import ValidationError
from .nodes.common import ProtocolParams
from .plant import DAY_SECONDS, DaylightProfile, Lamp, LdrCircuit, Room, Sensor
from .radio import ChannelParams

MAX_NODES_PER_ROLE = 15


@dataclass(frozen=True)
class NodeSpec:
    id: int
    pos: tuple[float, float] | None = None
    join_at: float = 0.0
    kill_at: float | None = None
    target_lux: float | None = None


@dataclass(frozen=True)
class Diagnostic:
    path: str
    message: str
    severity: str = "error"

    def __str__(self) -> str:
        return f"{self.severity}: {self.path}: {self.message}"


@dataclass
class Scenario:
    room: Room
    ldr: LdrCircuit = field(default_factory=LdrCircuit)
    daylight: DaylightProfile = field(default_factory=DaylightProfile)
    channel: ChannelParams = field(default_factory=ChannelParams)
    mn: NodeSpec = field(default_factory=lambda: NodeSpec(1))
    sns: list[NodeSpec] = field(default_factory=list)
    lcns: list[NodeSpec] = field(default_factory=list)
    protocol: ProtocolParams = field(default_factory=ProtocolParams)
    duration: float = 3600.0
    seed: int = 0
    start_hour: float = 0.0
    lit_hours: tuple[tuple[float, float], ...] = ((0.0, 24.0),)
    name: str = "scenario"

    def replace(self, **changes: Any) -> Scenario:
        return dataclasses.replace(self, **changes)

    def with_protocol(self, **changes: Any) -> Scenario:
        return self.replace(protocol=dataclasses.replace(self.protocol, **changes))

    def with_channel(self, **changes: Any) -> Scenario:
        return self.replace(channel=dataclasses.replace(self.channel, **changes))

    @property
    def start_second(self) -> float:
        return self.start_hour * 3600.0

    @property
    def lit_hours_per_day(self) -> float:
        return sum(b - a for a, b in self.lit_hours)

    def lit_at(self, second_of_day: float) -> bool:
        h = (second_of_day % DAY_SECONDS) / 3600.0
        return any(a <= h < b for a, b in self.lit_hours)


# ------------------------------------------------------------------ loading


def _section(data: dict, key: str) -> dict:
    value = data.get(key) or {}
    if not isinstance(value, dict):
        raise ValidationError(f"{key}: expected a mapping", [Diagnostic(key, "expected a mapping")])
    return value


def _node(raw: Any, path: str) -> NodeSpec:
    if isinstance(raw, int):
        return NodeSpec(raw)
    if not isinstance(raw, dict) or "id" not in raw:
        raise ValidationError(f"{path}: node needs an id", [Diagnostic(path, "node needs an id")])
    pos = raw.get("pos")
    return NodeSpec(
        id=int(raw["id"]),
        pos=tuple(float(v) for v in pos) if pos is not None else None,
        join_at=float(raw.get("join_at", 0.0)),
        kill_at=float(raw["kill_at"]) if raw.get("kill_at") is not None else None,
        target_lux=float(raw["target_lux"]) if raw.get("target_lux") is not None else None,
    )


def _protocol(raw: dict) -> ProtocolParams:
    known = {f.name for f in dataclasses.fields(ProtocolParams)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ValidationError(
            "unknown protocol keys", [Diagnostic(f"protocol.{k}", "unknown key") for k in unknown]
        )
    kwargs = dict(raw)
    if "hello_backoff" in kwargs:
        kwargs["hello_backoff"] = tuple(float(v) for v in kwargs["hello_backoff"])
    return ProtocolParams(**kwargs)


def scenario_from_dict(data: dict) -> Scenario:
    """Build a scenario from parsed YAML; raises ``ValidationError`` on shape errors."""
    if not isinstance(data, dict):
        raise ValidationError("scenario must be a mapping", [Diagnostic("", "expected a mapping")])
    try:
        room_d = _section(data, "room")
        sensors = tuple(
            Sensor(int(s["id"]), float(s.get("daylight_gain", 1.0))) for s in room_d.get("sensors", [])
        )
        lamps = tuple(Lamp(int(l["id"]), float(l.get("p_max", 40.0))) for l in room_d.get("lamps", []))
        coupling = tuple(tuple(float(c) for c in row) for row in room_d.get("coupling", []))
        room = Room(sensors, lamps, coupling)

        ldr_d = _section(data, "ldr")
        ldr = LdrCircuit(float(ldr_d.get("r1_kohm", 10.0)), int(ldr_d.get("adc_bits", 10)))

        day_d = _section(data, "daylight")
        schedule = day_d.get("schedule_hours", [[0.0, 0.0]])
        daylight = DaylightProfile(
            tuple((float(h) * 3600.0, float(lux)) for h, lux in schedule),
            float(day_d.get("day_hours", 6.0)),
            float(day_d.get("night_hours", 6.0)),
        )

        ch_d = _section(data, "channel")
        known_ch = {f.name for f in dataclasses.fields(ChannelParams)}
        bad = sorted(set(ch_d) - known_ch)
        if bad:
            raise ValidationError(
                "unknown channel keys", [Diagnostic(f"channel.{k}", "unknown key") for k in bad]
            )
        channel = ChannelParams(**ch_d)

        nodes_d = _section(data, "nodes")
        mn = _node(nodes_d.get("mn", {"id": 1}), "nodes.mn")
        sns = [_node(n, f"nodes.sn[{i}]") for i, n in enumerate(nodes_d.get("sn", []))]
        lcns = [_node(n, f"nodes.lcn[{i}]") for i, n in enumerate(nodes_d.get("lcn", []))]

        protocol = _protocol(_section(data, "protocol"))

        run_d = _section(data, "run")
        lit = tuple((float(a), float(b)) for a, b in run_d.get("lit_hours", [[0.0, 24.0]]))
        return Scenario(
            room=room,
            ldr=ldr,
            daylight=daylight,
            channel=channel,
            mn=mn,
            sns=sns,
            lcns=lcns,
            protocol=protocol,
            duration=float(run_d.get("duration", 3600.0)),
            seed=int(run_d.get("seed", 0)),
            start_hour=float(run_d.get("start_hour", 0.0)),
            lit_hours=lit,
            name=str(data.get("name", "scenario")),
        )
    except ValidationError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed scenario: {exc}", [Diagnostic("", f"malformed: {exc}")]) from exc


def load_scenario(path: str | Path) -> Scenario:
    """Read a YAML (or JSON) scenario file. ``OSError`` propagates to the caller."""
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ValidationError(f"{path}: not valid YAML", [Diagnostic("", str(exc))]) from exc
    scenario = scenario_from_dict(data)
    if "name" not in (data or {}):
        scenario.name = Path(path).stem
    return scenario


def scenario_to_dict(s: Scenario) -> dict:
    def node(n: NodeSpec) -> dict:
        out: dict[str, Any] = {"id": n.id}
        if n.pos is not None:
            out["pos"] = list(n.pos)
        if n.join_at:
            out["join_at"] = n.join_at
        if n.kill_at is not None:
            out["kill_at"] = n.kill_at
        if n.target_lux is not None:
            out["target_lux"] = n.target_lux
        return out

    protocol = dataclasses.asdict(s.protocol)
    protocol["hello_backoff"] = list(protocol["hello_backoff"])
    return {
        "name": s.name,
        "room": {
            "sensors": [{"id": x.id, "daylight_gain": x.daylight_gain} for x in s.room.sensors],
            "lamps": [{"id": x.id, "p_max": x.p_max} for x in s.room.lamps],
            "coupling": [list(row) for row in s.room.coupling],
        },
        "ldr": {"r1_kohm": s.ldr.r1_kohm, "adc_bits": s.ldr.adc_bits},
        "daylight": {
            "schedule_hours": [[t / 3600.0, lux] for t, lux in s.daylight.breakpoints],
            "day_hours": s.daylight.day_hours,
            "night_hours": s.daylight.night_hours,
        },
        "channel": dataclasses.asdict(s.channel),
        "nodes": {
            "mn": node(s.mn),
            "sn": [node(n) for n in s.sns],
            "lcn": [node(n) for n in s.lcns],
        },
        "protocol": protocol,
        "run": {
            "duration": s.duration,
            "seed": s.seed,
            "start_hour": s.start_hour,
            "lit_hours": [list(w) for w in s.lit_hours],
        },
    }


def dump_scenario(s: Scenario, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(scenario_to_dict(s), sort_keys=False, default_flow_style=None))


# --------------------------------------------------------------- validation


def per_step_lux(s: Scenario, sensor_id: int) -> float:
    """Largest lux change one control step can cause at a sensor.

    Assumes the worst case where every lamp the sensor can see is mapped
    to it and moves together.
    """
    row = s.room.coupling[s.room.sensor_index(sensor_id)]
    return sum(row) * s.protocol.step / s.protocol.levels


def validate(s: Scenario) -> list[Diagnostic]:
    """Check a scenario; returns diagnostics, empty when it is sound.

    Warnings flag scenarios that will run but may not settle.
    """
    out: list[Diagnostic] = []

    def err(path: str, msg: str) -> None:
        out.append(Diagnostic(path, msg))

    def dup_ids(items, path: str, what: str) -> None:
        seen: dict[int, int] = {}
        for i, item in enumerate(items):
            if item.id in seen:
                err(f"{path}[{i}]", f"duplicate {what} id {item.id} (also at {path}[{seen[item.id]}])")
            else:
                seen[item.id] = i

    room = s.room
    dup_ids(room.sensors, "room.sensors", "sensor")
    dup_ids(room.lamps, "room.lamps", "lamp")
    if len(room.coupling) != len(room.sensors):
        err("room.coupling", f"{len(room.coupling)} rows for {len(room.sensors)} sensors")
    for i, row in enumerate(room.coupling):
        if len(row) != len(room.lamps):
            err(f"room.coupling[{i}]", f"{len(row)} columns for {len(room.lamps)} lamps")
        for j, c in enumerate(row):
            if c < 0:
                err(f"room.coupling[{i}][{j}]", "coupling must be >= 0")
    for i, sensor in enumerate(room.sensors):
        if not 0.0 <= sensor.daylight_gain <= 1.0:
            err(f"room.sensors[{i}].daylight_gain", "must lie in [0, 1]")
    for i, lamp in enumerate(room.lamps):
        if lamp.p_max < 0:
            err(f"room.lamps[{i}].p_max", "must be >= 0")

    if s.ldr.r1_kohm <= 0:
        err("ldr.r1_kohm", "must be > 0")
    if s.ldr.adc_bits < 1:
        err("ldr.adc_bits", "must be >= 1")

    bps = s.daylight.breakpoints
    if not bps or bps[0][0] != 0.0:
        err("daylight.schedule_hours", "must start at hour 0 to cover the whole day")
    for i, (t, lux) in enumerate(bps):
        if lux < 0:
            err(f"daylight.schedule_hours[{i}]", "ambient lux must be >= 0")
        if not 0.0 <= t < DAY_SECONDS:
            err(f"daylight.schedule_hours[{i}]", "hour must lie in [0, 24)")
        if i and t <= bps[i - 1][0]:
            err(f"daylight.schedule_hours[{i}]", "hours must increase strictly")

    for key, msg in s.channel.problems():
        err(f"channel.{key}", msg)

    for path, nodes, role in (("nodes.sn", s.sns, "SN"), ("nodes.lcn", s.lcns, "LCN")):
        if len(nodes) > MAX_NODES_PER_ROLE:
            err(path, f"{len(nodes)} {role}s exceed the 4-bit ID space (at most 15, ID 0 is reserved)")
        dup_ids(nodes, path, role)
        for i, n in enumerate(nodes):
            if not 1 <= n.id <= 15:
                err(f"{path}[{i}].id", f"{role} id {n.id} outside the 4-bit ID space 1..15")
            if n.join_at < 0:
                err(f"{path}[{i}].join_at", "must be >= 0")
            if n.kill_at is not None and n.kill_at < n.join_at:
                err(f"{path}[{i}].kill_at", "node killed before it joins")
    if not 1 <= s.mn.id <= 15:
        err("nodes.mn.id", "master address index must lie in 1..15")

    sensor_ids = {x.id for x in room.sensors}
    lamp_ids = {x.id for x in room.lamps}
    for i, n in enumerate(s.sns):
        if n.id not in sensor_ids:
            err(f"nodes.sn[{i}]", f"SN {n.id} has no sensor in room.sensors")
    for i, n in enumerate(s.lcns):
        if n.id not in lamp_ids:
            err(f"nodes.lcn[{i}]", f"LCN {n.id} has no lamp in room.lamps")
    for j, lamp in enumerate(room.lamps):
        if lamp.id not in {n.id for n in s.lcns}:
            err(f"room.lamps[{j}]", f"lamp {lamp.id} has no LCN driving it")

    p = s.protocol
    if p.levels < 1 or p.levels > 15:
        err("protocol.levels", "dim scale must be in 1..15")
    if not 1 <= p.step <= 15:
        err("protocol.step", "step count must fit the 4-bit field (1..15)")
    if not 0 <= p.initial_level <= p.levels:
        err("protocol.initial_level", "must lie in [0, levels]")
    if p.debounce < 1:
        err("protocol.debounce", "must be >= 1")
    if p.deadband_lux < 0:
        err("protocol.deadband_lux", "must be >= 0")
    for name in ("p1_timer", "p2_timer", "p2_rebroadcast", "p3_window", "audit_period", "sense_period",
                 "handshake_timeout", "audit_window"):
        if getattr(p, name) <= 0:
            err(f"protocol.{name}", "must be > 0")
    lo, hi = p.hello_backoff
    if not 0 < lo <= hi:
        err("protocol.hello_backoff", "need 0 < low <= high")
    if p.addr_window >= p.handshake_timeout:
        err("protocol.addr_window", "must be shorter than handshake_timeout")

    if s.duration <= 0:
        err("run.duration", "must be > 0")
    if not 0.0 <= s.start_hour < 24.0:
        err("run.start_hour", "must lie in [0, 24)")
    for i, (a, b) in enumerate(s.lit_hours):
        if not 0.0 <= a < b <= 24.0:
            err(f"run.lit_hours[{i}]", "need 0 <= start < end <= 24")

    if not out and room.sensors:
        for i, sensor in enumerate(room.sensors):
            change = per_step_lux(s, sensor.id)
            if p.deadband_lux < change:
                out.append(
                    Diagnostic(
                        "protocol.deadband_lux",
                        f"deadband {p.deadband_lux:g} lux < {change:g} lux per step at sensor "
                        f"{sensor.id}; the loop may oscillate",
                        "warning",
                    )
                )
    return out


def errors_only(diags: list[Diagnostic]) -> list[Diagnostic]:
    return [d for d in diags if d.severity == "error"]


def check(s: Scenario) -> list[Diagnostic]:
    """Raise ``ValidationError`` on errors; return any warnings."""
    diags = validate(s)
    errors = errors_only(diags)
    if errors:
        raise ValidationError(f"{len(errors)} problem(s) in scenario {s.name}", errors)
    return diags
