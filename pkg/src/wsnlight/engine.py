"""Deterministic discrete-event run of a scenario.

Events are ordered by (time, end-of-run flag, insertion sequence), so the
end-of-run event follows every other event at its instant and ties go to
whichever event was scheduled first. All randomness comes from a single
generator seeded by the scenario; per-node generators are drawn from it
at setup in roster order.

Sensor ticks are only simulated while they can matter: a tick that
produces no request parks the sensor until the light it sees or its own
state can change (dim level, daylight or lighting-schedule edge, frame
reception). This yields the same behaviour as ticking every period.
"""

from __future__ import annotations

import heapq
import logging
import math
import random
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple

from .energy import EnergyReport, PowerSample, build_report, integrate
from .frame import Frame
from .nodes.common import (
    Action,
    ArmTimer,
    Boot,
    FrameRx,
    Send,
    SenseTick,
    SetDimLevel,
    TimerFired,
    TraceEvent,
)
from .nodes.controller import LightController
from .nodes.master import MasterNode
from .nodes.sensor import SensorNode
from .plant import DAY_SECONDS, illuminance_at, sense_lux
from .radio import Channel, RadioPacket, ReceiverConfig, enqueue_rx
from .scenario import Scenario, check

log = logging.getLogger(__name__)

# event kinds
BOOT, TX, DELIVERY, SEND_LATER, TIMER, SENSE, PLANT, KILL, END = (
    "boot", "tx", "delivery", "send", "timer", "sense", "plant", "kill", "end",
)


class TraceRecord(NamedTuple):
    time: float
    node: str
    direction: str  # tx, rx, drop, state, dim, energy
    detail: str

    def format(self) -> str:
        return f"{self.time:.6f}\t{self.node}\t{self.direction}\t{self.detail}"


@dataclass
class RunResult:
    trace: list[TraceRecord] | None
    report: EnergyReport
    master: MasterNode
    sensors: dict[int, SensorNode]
    controllers: dict[int, LightController]
    power_trace: list[PowerSample]
    level_trace: list[tuple[float, int, int]]  # (t, lamp, level)
    tx_counts: dict[str, int] = field(default_factory=dict)
    collisions: int = 0

    @property
    def commissioned_at(self) -> float | None:
        return self.master.commissioned_at

    def mapping(self) -> dict[int, frozenset[int]]:
        return {sn: frozenset(e.mapped) for sn, e in self.master.sn_table.items()}

    def trace_text(self) -> str:
        return "".join(r.format() + "\n" for r in self.trace or ())


class EventQueue:
    def __init__(self) -> None:
        self._heap: list = []
        self._seq = 0

    def schedule(self, time: float, kind: str, payload=None) -> None:
        self._seq += 1
        heapq.heappush(self._heap, (time, kind == END, self._seq, kind, payload))

    def next_event(self):
        time, _, seq, kind, payload = heapq.heappop(self._heap)
        return time, seq, kind, payload

    def __len__(self) -> int:
        return len(self._heap)


def _name(role: str, node_id: int) -> str:
    return f"{role}{node_id}"


class Simulation:
    def __init__(
        self,
        scenario: Scenario,
        keep_trace: bool = True,
        trace_sink: Callable[[TraceRecord], None] | None = None,
    ) -> None:
        check(scenario)
        self.s = scenario
        self.p = scenario.protocol
        self.rng = random.Random(scenario.seed)
        self.channel = Channel(scenario.channel, self.rng)
        self.queue = EventQueue()
        self.trace: list[TraceRecord] | None = [] if keep_trace else None
        self.trace_sink = trace_sink
        self.tracing = keep_trace or trace_sink is not None
        self.now = 0.0

        cap = scenario.channel.rx_queue_capacity
        self.master = MasterNode(own_index=scenario.mn.id, params=self.p)
        self.mn_name = _name("MN", scenario.mn.id)
        self.sensors: dict[int, SensorNode] = {}
        self.controllers: dict[int, LightController] = {}
        self.handlers: dict[str, Callable] = {self.mn_name: self.master.handle}
        self.receivers: dict[str, ReceiverConfig] = {}
        self.rx_config_all: dict[str, ReceiverConfig] = {
            self.mn_name: ReceiverConfig(self.master.own_addr, cap)
        }
        self.positions = {self.mn_name: scenario.mn.pos}
        for spec in scenario.sns:
            name = _name("SN", spec.id)
            node = SensorNode(spec.id, self.p, target_lux=spec.target_lux)
            self.sensors[spec.id] = node
            self.handlers[name] = node.handle
            self.rx_config_all[name] = ReceiverConfig(capacity=cap)
            self.positions[name] = spec.pos
        for spec in scenario.lcns:
            name = _name("LCN", spec.id)
            node = LightController(spec.id, self.p, rng=random.Random(self.rng.getrandbits(64)))
            self.controllers[spec.id] = node
            self.handlers[name] = node.handle
            self.rx_config_all[name] = ReceiverConfig(capacity=cap)
            self.positions[name] = spec.pos

        self.tx_queues: dict[str, list[tuple[int, Frame]]] = {n: [] for n in self.handlers}
        self.tx_busy: dict[str, bool] = {n: False for n in self.handlers}
        self.tx_free_at: dict[str, float] = {n: 0.0 for n in self.handlers}
        self.tx_counts: dict[str, int] = {}
        self.collisions = 0

        self.levels: dict[int, int] = {lamp.id: 0 for lamp in scenario.room.lamps}
        self.p_max = {lamp.id: lamp.p_max for lamp in scenario.room.lamps}
        self.watts: dict[int, float] = {}
        self.power_trace: list[PowerSample] = []
        self.level_trace: list[tuple[float, int, int]] = []
        self.lit = scenario.lit_at(scenario.start_second)
        self.ambient = scenario.daylight.ambient(scenario.start_second)

        self.sense_parked: dict[int, bool] = {sid: True for sid in self.sensors}
        self.sense_k: dict[int, int] = {}
        self.sense_phase = {
            sid: (sid / 16.0) * self.p.sense_period for sid in self.sensors
        }

    # ------------------------------------------------------------ tracing

    def record(self, node: str, direction: str, detail: str) -> None:
        if not self.tracing:
            return
        rec = TraceRecord(self.now, node, direction, detail)
        if self.trace is not None:
            self.trace.append(rec)
        if self.trace_sink is not None:
            self.trace_sink(rec)

    # ------------------------------------------------------------ setup

    def _schedule(self, time: float, kind: str, payload=None) -> None:
        if time > self.s.duration:
            return
        self.queue.schedule(time, kind, payload)

    def _plant_edges(self) -> list[float]:
        """Sim times at which daylight or the lighting schedule changes."""
        offsets = {t for t, _ in self.s.daylight.breakpoints}
        for a, b in self.s.lit_hours:
            offsets.add(a * 3600.0 % DAY_SECONDS)
            offsets.add(b * 3600.0 % DAY_SECONDS)
        start = self.s.start_second
        edges = []
        day = 0
        while True:
            base = day * DAY_SECONDS - start
            if base > self.s.duration:
                break
            for off in sorted(offsets):
                t = base + off
                if 0.0 < t <= self.s.duration:
                    edges.append(t)
            day += 1
        return sorted(edges)

    def _boot_all(self) -> None:
        self._schedule(0.0, BOOT, self.mn_name)
        for spec in self.s.lcns:
            self._schedule(spec.join_at, BOOT, _name("LCN", spec.id))
            if spec.kill_at is not None:
                self._schedule(spec.kill_at, KILL, _name("LCN", spec.id))
        for spec in self.s.sns:
            self._schedule(spec.join_at, BOOT, _name("SN", spec.id))
            if spec.kill_at is not None:
                self._schedule(spec.kill_at, KILL, _name("SN", spec.id))
        for t in self._plant_edges():
            self._schedule(t, PLANT)
        self._schedule(self.s.duration, END)

    # ------------------------------------------------------------ main loop

    def run(self) -> RunResult:
        self._boot_all()
        handlers = {
            BOOT: self._on_boot,
            TX: self._on_tx,
            DELIVERY: self._on_delivery,
            SEND_LATER: self._on_send_later,
            TIMER: self._on_timer,
            SENSE: self._on_sense,
            PLANT: self._on_plant,
            KILL: self._on_kill,
        }
        while self.queue:
            time, _, kind, payload = self.queue.next_event()
            self.now = time
            if kind == END:
                break
            handlers[kind](payload)
        self.now = self.s.duration
        per_lamp = integrate(self.power_trace, self.s.duration)
        for lamp in self.s.room.lamps:
            per_lamp.setdefault(lamp.id, 0.0)
        report = build_report(per_lamp, self.s.duration, self.s.room, self.s.lit_hours_per_day)
        return RunResult(
            trace=self.trace,
            report=report,
            master=self.master,
            sensors=self.sensors,
            controllers=self.controllers,
            power_trace=self.power_trace,
            level_trace=self.level_trace,
            tx_counts=self.tx_counts,
            collisions=self.collisions,
        )

    # ------------------------------------------------------------ events

    def _alive(self, name: str) -> bool:
        return name in self.receivers

    def _on_boot(self, name: str) -> None:
        self.receivers[name] = self.rx_config_all[name]
        self.record(name, "state", "boot")
        self._realize(name, self.handlers[name](Boot(self.now)))
        if name.startswith("SN"):
            self._unpark(int(name[2:]))

    def _on_kill(self, name: str) -> None:
        if not self._alive(name):
            return
        del self.receivers[name]
        self.tx_queues[name].clear()
        self.record(name, "state", "killed")
        if name.startswith("LCN"):
            self._set_level(int(name[3:]), 0, name, "powered off")

    def _on_timer(self, payload) -> None:
        name, kind = payload
        if not self._alive(name):
            return
        self._realize(name, self.handlers[name](TimerFired(kind, self.now)))

    def _on_send_later(self, payload) -> None:
        name, dest, frame = payload
        if self._alive(name):
            self._enqueue_tx(name, dest, frame)

    def _enqueue_tx(self, name: str, dest: int, frame: Frame) -> None:
        self.tx_queues[name].append((dest, frame))
        if not self.tx_busy[name]:
            self.tx_busy[name] = True
            self._schedule(max(self.now, self.tx_free_at[name]), TX, name)

    def _on_tx(self, name: str) -> None:
        q = self.tx_queues[name]
        if not q or not self._alive(name):
            self.tx_busy[name] = False
            return
        dest, frame = q.pop(0)
        packet = self.channel.begin(name, dest, frame, self.now)
        self.tx_counts[frame.kind.name] = self.tx_counts.get(frame.kind.name, 0) + 1
        if self.tracing:
            self.record(name, "tx", f"{frame} dest=0x{dest:02X}")
        self._schedule(packet.t_end, DELIVERY, packet)
        self.tx_free_at[name] = packet.t_end + self.p.tx_gap
        if q:
            self._schedule(self.tx_free_at[name], TX, name)
        else:
            self.tx_busy[name] = False

    def _on_delivery(self, packet: RadioPacket) -> None:
        deliveries, collided = self.channel.resolve(packet, self.receivers, self.positions)
        if collided:
            self.collisions += 1
        for name, frame in deliveries:
            config = self.receivers[name]
            accepted, evicted = enqueue_rx(config, packet.dest, frame)
            if not accepted:
                continue
            if evicted is not None and self.tracing:
                self.record(name, "drop", f"{evicted} rx queue overflow")
            while config.queue:
                rx = config.queue.popleft()
                if self.tracing:
                    self.record(name, "rx", f"{rx} dest=0x{packet.dest:02X}")
                self._realize(name, self.handlers[name](FrameRx(rx, packet.dest, self.now)))
            if name.startswith("SN"):
                self._unpark(int(name[2:]))

    def _realize(self, name: str, actions: list[Action]) -> None:
        if name.startswith("LCN"):
            # the dimmer may have learned or dropped its hardware address
            self.rx_config_all[name].rx_addr = self.controllers[int(name[3:])].rx_addr
        for action in actions:
            if isinstance(action, Send):
                if action.delay > 0:
                    self._schedule(self.now + action.delay, SEND_LATER, (name, action.dest, action.frame))
                else:
                    self._enqueue_tx(name, action.dest, action.frame)
            elif isinstance(action, SetDimLevel):
                self._set_level(int(name[3:]), action.level, name, "set")
            elif isinstance(action, ArmTimer):
                self._schedule(action.at, TIMER, (name, action.kind))
            elif isinstance(action, TraceEvent):
                self.record(name, "drop" if action.tag == "drop" else "state", action.detail)

    # ------------------------------------------------------------ plant

    def _power(self, lamp: int) -> float:
        if not self.lit:
            return 0.0
        return self.p_max[lamp] * self.levels[lamp] / self.p.levels

    def _emit_power(self, lamp: int, node: str) -> None:
        watts = self._power(lamp)
        if self.watts.get(lamp) == watts:
            return
        self.watts[lamp] = watts
        self.power_trace.append(PowerSample(self.now, lamp, watts))
        self.record(node, "energy", f"lamp={lamp} W={watts:.6f}")

    def _set_level(self, lamp: int, level: int, node: str, why: str) -> None:
        self.levels[lamp] = level
        self.level_trace.append((self.now, lamp, level))
        self.record(node, "dim", f"level={level} {why}")
        self._emit_power(lamp, node)
        self._unpark_all()

    def _on_plant(self, _payload) -> None:
        tod = self.s.start_second + self.now
        lit = self.s.lit_at(tod)
        ambient = self.s.daylight.ambient(tod)
        if lit != self.lit:
            self.lit = lit
            self.record("PLANT", "state", "lights on" if lit else "lights off")
            for lamp in sorted(self.levels):
                self._emit_power(lamp, "PLANT")
        if ambient != self.ambient:
            self.ambient = ambient
            self.record("PLANT", "state", f"ambient={ambient:g}")
        self._unpark_all()

    def measured_lux(self, sensor_id: int) -> float:
        fractions = {
            lamp: (level / self.p.levels if self.lit else 0.0) for lamp, level in self.levels.items()
        }
        true_lux = illuminance_at(self.s.room, sensor_id, fractions, self.ambient)
        return sense_lux(true_lux, self.s.ldr)

    # ------------------------------------------------------------ sensing

    def _unpark_all(self) -> None:
        for sid in self.sensors:
            self._unpark(sid)

    def _unpark(self, sid: int) -> None:
        if not self.sense_parked[sid] or not self._alive(_name("SN", sid)):
            return
        period, phase = self.p.sense_period, self.sense_phase[sid]
        k = math.floor((self.now - phase) / period) + 1
        if phase + k * period <= self.now:
            k += 1
        self.sense_parked[sid] = False
        self.sense_k[sid] = k
        self._schedule(phase + k * period, SENSE, sid)

    def _on_sense(self, sid: int) -> None:
        name = _name("SN", sid)
        if not self._alive(name):
            self.sense_parked[sid] = True
            return
        if not self.lit:
            self.sense_parked[sid] = True
            return
        actions = self.sensors[sid].handle(SenseTick(self.now, self.measured_lux(sid)))
        if not actions:
            self.sense_parked[sid] = True
            return
        self._realize(name, actions)
        k = self.sense_k[sid] + 1
        self.sense_k[sid] = k
        self._schedule(self.sense_phase[sid] + k * self.p.sense_period, SENSE, sid)


def simulate(
    scenario: Scenario,
    keep_trace: bool = True,
    trace_sink: Callable[[TraceRecord], None] | None = None,
) -> RunResult:
    """Run a scenario to its end; raises ``ValidationError`` before any event on bad input."""
    return Simulation(scenario, keep_trace=keep_trace, trace_sink=trace_sink).run()


def run(scenario: Scenario) -> tuple[list[TraceRecord], EnergyReport]:
    result = simulate(scenario)
    return result.trace, result.report


def parse_trace_line(line: str) -> TraceRecord:
    time, node, direction, detail = line.rstrip("\n").split("\t", 3)
    return TraceRecord(float(time), node, direction, detail)


def report_from_trace(records: Iterable[TraceRecord], scenario: Scenario) -> EnergyReport:
    """Rebuild the energy report from the ``energy`` records of a saved trace."""
    samples = []
    for rec in records:
        if rec.direction != "energy":
            continue
        fields = dict(part.split("=", 1) for part in rec.detail.split())
        samples.append(PowerSample(rec.time, int(fields["lamp"]), float(fields["W"])))
    per_lamp = integrate(samples, scenario.duration)
    for lamp in scenario.room.lamps:
        per_lamp.setdefault(lamp.id, 0.0)
    return build_report(per_lamp, scenario.duration, scenario.room, scenario.lit_hours_per_day)
