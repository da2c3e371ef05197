"""Master node: address assignment, sensor registration, lamp mapping, control relay.

Phases run strictly forward::

    P1_LCN_REG -> P2_SN_REG -> P3_MAPPING -> P4_NORMAL

P1 hands out LCN addresses through a three-way handshake (hello, echo +
address, ack). P2 broadcasts the master address and records sensor acks.
P3 drives one lamp at a time to full output; a sensor that asks for less
light ``debounce`` times while its lamp is lit is mapped to it. P4 relays
sensor requests to mapped lamps and audits node presence. Nodes joining
during P4 get the same sub-procedures without leaving P4.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from enum import Enum

from ..frame import BROADCAST, Frame, FrameKind, NIBBLE_MAX, lcn_address, mn_address
from .common import (
    Action,
    Boot,
    Event,
    FrameRx,
    ProtocolParams,
    Send,
    TimerFired,
    TimerTable,
    drop,
    note,
)

TABLE_CAPACITY = NIBBLE_MAX  # IDs 1..15; 0 is reserved


class Phase(Enum):
    P1_LCN_REG = 1
    P2_SN_REG = 2
    P3_MAPPING = 3
    P4_NORMAL = 4


@dataclass
class LcnEntry:
    addr_index: int
    last_seen: float
    miss_count: int = 0
    responded: bool = True

    @property
    def hw_address(self) -> int:
        return lcn_address(self.addr_index)


@dataclass
class SnEntry:
    last_seen: float
    miss_count: int = 0
    responded: bool = True
    mapped: set[int] = field(default_factory=set)
    requests: dict[int, int] = field(default_factory=dict)  # LCN id -> DEC count while lit


@dataclass
class Handshake:
    lcn_id: int
    addr_index: int
    attempts: int = 1
    round: int = 1


@dataclass
class MappingJob:
    lcns: list[int]
    sn_filter: frozenset[int] | None = None  # None: every sensor may claim


@dataclass
class Cursor:
    lcn_id: int
    sn_filter: frozenset[int] | None
    started: float


@dataclass
class MasterNode:
    own_index: int = 1
    params: ProtocolParams = field(default_factory=ProtocolParams)
    phase: Phase = Phase.P1_LCN_REG
    lcn_table: dict[int, LcnEntry] = field(default_factory=dict)
    sn_table: dict[int, SnEntry] = field(default_factory=dict)
    pending_hellos: list[int] = field(default_factory=list)
    # address indices promised to LCNs whose handshake is still unresolved
    reserved: dict[int, int] = field(default_factory=dict)
    handshake: Handshake | None = None
    jobs: list[MappingJob] = field(default_factory=list)
    mapping_cursor: Cursor | None = None
    audit_open: bool = False
    commissioned_at: float | None = None
    timers: TimerTable = field(default_factory=TimerTable)
    requeued: dict[int, int] = field(default_factory=dict)  # LCN id -> handshake round

    @property
    def own_addr(self) -> int:
        return mn_address(self.own_index)

    # ---------------------------------------------------------------- entry

    def handle(self, event: Event) -> list[Action]:
        if isinstance(event, FrameRx):
            return self._on_frame(event)
        if isinstance(event, TimerFired):
            if not self.timers.take(event):
                return []
            return self._on_timer(event.kind, event.t)
        if isinstance(event, Boot):
            return [
                note("phase P1_LCN_REG"),
                self.timers.arm("p1", event.t + self.params.p1_timer),
            ]
        raise TypeError(f"MN cannot handle {event!r}")

    def _on_timer(self, kind: str, now: float) -> list[Action]:
        if kind == "p1" and self.phase is Phase.P1_LCN_REG:
            return [note("P1 timer expired"), *self._enter_p2(now)]
        if kind == "p2_bcast" and self.phase is Phase.P2_SN_REG:
            return [
                self._bcast(),
                self.timers.arm("p2_bcast", now + self.params.p2_rebroadcast),
            ]
        if kind == "p2" and self.phase is Phase.P2_SN_REG:
            return [note("P2 timer expired"), *self._enter_p3(now)]
        if kind == "hs":
            return self._handshake_timeout(now)
        if kind == "map_check":
            return self._map_check(now)
        if kind == "map_window":
            return [note("mapping window expired"), *self._close_window(now)]
        if kind == "audit":
            return self.topology_audit(now)
        if kind == "audit_eval":
            return self.evaluate_audit(now)
        return []

    def _on_frame(self, event: FrameRx) -> list[Action]:
        frame, kind, now = event.frame, event.frame.kind, event.t
        if kind is FrameKind.LCN_HELLO:
            return self._on_hello(frame, now)
        if kind is FrameKind.LCN_ADDR_ACK:
            return self._on_addr_ack(frame, now)
        if kind is FrameKind.SN_ACK:
            return self._on_sn_ack(frame, now)
        if kind in (FrameKind.SN_REQ_INC, FrameKind.SN_REQ_DEC):
            return self._on_request(frame, now)
        if kind is FrameKind.TOPO_PONG:
            return self._on_pong(frame, event.dest, now)
        return drop("not for the master", frame)

    # ----------------------------------------------------------- phase P1

    def _lcn_table_full(self) -> bool:
        want = self.params.expected_lcns or TABLE_CAPACITY
        return len(self.lcn_table) >= min(want, TABLE_CAPACITY)

    def _on_hello(self, frame: Frame, now: float) -> list[Action]:
        lcn = frame.nibble
        if lcn == 0:
            return drop("invalid id", frame)
        if self.phase in (Phase.P2_SN_REG, Phase.P3_MAPPING):
            return drop("wrong phase", frame)
        if lcn not in self.lcn_table and len(self.lcn_table) >= TABLE_CAPACITY:
            return drop("LCN table full", frame)
        if (self.handshake and self.handshake.lcn_id == lcn) or lcn in self.pending_hellos:
            return drop("handshake already queued", frame)
        self.pending_hellos.append(lcn)
        if self.handshake is None:
            return self._start_handshake(now)
        return [note(f"LCN {lcn} queued for handshake")]

    def _free_index(self) -> int | None:
        used = {e.addr_index for e in self.lcn_table.values()} | set(self.reserved.values())
        for index in range(1, TABLE_CAPACITY + 1):
            if index not in used:
                return index
        return None

    def _start_handshake(self, now: float) -> list[Action]:
        while self.pending_hellos:
            lcn = self.pending_hellos.pop(0)
            entry = self.lcn_table.get(lcn)
            index = entry.addr_index if entry else self.reserved.get(lcn) or self._free_index()
            if index is None:
                continue
            if entry is None:
                self.reserved[lcn] = index
            self.handshake = Handshake(lcn, index, round=self.requeued.pop(lcn, 1))
            return self._handshake_frames(now)
        self.handshake = None
        return []

    def _handshake_frames(self, now: float) -> list[Action]:
        hs = self.handshake
        return [
            Send(BROADCAST, Frame(FrameKind.MN_ID_ECHO, hs.lcn_id)),
            Send(BROADCAST, Frame(FrameKind.MN_ADDR_SET, hs.addr_index)),
            self.timers.arm("hs", now + self.params.handshake_timeout),
        ]

    def _handshake_timeout(self, now: float) -> list[Action]:
        hs = self.handshake
        if hs is None:
            return []
        if hs.attempts < self.params.handshake_retries:
            hs.attempts += 1
            return self._handshake_frames(now)
        self.handshake = None
        if hs.round < self.params.handshake_rounds:
            # the node may already hold the address, so keep it reserved and retry later
            self.pending_hellos.append(hs.lcn_id)
            self.requeued[hs.lcn_id] = hs.round + 1
            actions: list[Action] = [note(f"handshake with LCN {hs.lcn_id} requeued")]
        else:
            self.reserved.pop(hs.lcn_id, None)
            actions = [note(f"handshake with LCN {hs.lcn_id} abandoned")]
        return actions + self._start_handshake(now)

    def _on_addr_ack(self, frame: Frame, now: float) -> list[Action]:
        hs = self.handshake
        if hs is None or frame.nibble != hs.addr_index:
            return drop("unexpected address ack", frame)
        self.timers.cancel("hs")
        self.handshake = None
        self.reserved.pop(hs.lcn_id, None)
        actions: list[Action] = []
        entry = self.lcn_table.get(hs.lcn_id)
        if entry is None:
            self.lcn_table[hs.lcn_id] = LcnEntry(hs.addr_index, now)
            actions.append(note(f"LCN {hs.lcn_id} registered at 0x{lcn_address(hs.addr_index):02X}"))
            if self.phase in (Phase.P3_MAPPING, Phase.P4_NORMAL):
                actions += self._add_job(MappingJob([hs.lcn_id]), now)
        else:
            entry.last_seen, entry.responded = now, True
            actions.append(note(f"LCN {hs.lcn_id} re-acknowledged"))
        if self.phase is Phase.P1_LCN_REG and self._lcn_table_full():
            actions += self._enter_p2(now)
        return actions + self._start_handshake(now)

    # ----------------------------------------------------------- phase P2

    def _bcast(self) -> Send:
        return Send(BROADCAST, Frame(FrameKind.MN_BCAST, self.own_index))

    def _enter_p2(self, now: float) -> list[Action]:
        self.phase = Phase.P2_SN_REG
        self.timers.cancel("p1")
        return [
            note("phase P2_SN_REG"),
            self._bcast(),
            self.timers.arm("p2_bcast", now + self.params.p2_rebroadcast),
            self.timers.arm("p2", now + self.params.p2_timer),
        ]

    def _sn_table_full(self) -> bool:
        want = self.params.expected_sns or TABLE_CAPACITY
        return len(self.sn_table) >= min(want, TABLE_CAPACITY)

    def _on_sn_ack(self, frame: Frame, now: float) -> list[Action]:
        sn = frame.nibble
        if sn == 0:
            return drop("invalid id", frame)
        if self.phase is Phase.P1_LCN_REG:
            return drop("wrong phase", frame)
        entry = self.sn_table.get(sn)
        if entry is not None:
            entry.last_seen, entry.responded = now, True
            return [note(f"SN {sn} present")]
        if len(self.sn_table) >= TABLE_CAPACITY:
            return drop("SN table full", frame)
        self.sn_table[sn] = SnEntry(now)
        actions: list[Action] = [note(f"SN {sn} registered")]
        if self.phase is Phase.P2_SN_REG:
            if self._sn_table_full():
                actions += self._enter_p3(now)
        elif self.lcn_table:
            actions += self._add_job(MappingJob(sorted(self.lcn_table), frozenset({sn})), now)
        return actions

    # ----------------------------------------------------------- phase P3

    def _enter_p3(self, now: float) -> list[Action]:
        self.phase = Phase.P3_MAPPING
        self.timers.cancel("p2", "p2_bcast")
        self.jobs.insert(0, MappingJob(sorted(self.lcn_table)))
        return [note("phase P3_MAPPING"), *self._next_window(now)]

    def _add_job(self, job: MappingJob, now: float) -> list[Action]:
        self.jobs.append(job)
        if self.mapping_cursor is None and self.phase is Phase.P4_NORMAL:
            return self._next_window(now)
        return []

    def _next_window(self, now: float) -> list[Action]:
        while self.jobs:
            job = self.jobs[0]
            if not job.lcns:
                self.jobs.pop(0)
                continue
            lcn = job.lcns.pop(0)
            if lcn not in self.lcn_table:
                continue
            self.mapping_cursor = Cursor(lcn, job.sn_filter, now)
            for sn, entry in self.sn_table.items():
                if job.sn_filter is None or sn in job.sn_filter:
                    entry.requests[lcn] = 0
            addr = self.lcn_table[lcn].hw_address
            max_frame = Frame(FrameKind.LCN_SET_MAX)
            return [
                note(f"mapping cursor -> LCN {lcn}"),
                *self._repeated(addr, max_frame),
                self.timers.arm("map_check", now + self.params.settle_time),
                self.timers.arm("map_window", now + self.params.p3_window),
            ]
        self.mapping_cursor = None
        if self.phase is Phase.P3_MAPPING:
            return self._enter_p4(now)
        return []

    def _repeated(self, addr: int, frame: Frame) -> list[Send]:
        gap = self.params.repeat_gap
        return [Send(addr, frame, delay=k * gap) for k in range(self.params.command_repeats)]

    def _counts_for_mapping(self, sn: int) -> bool:
        cur = self.mapping_cursor
        return cur is not None and (cur.sn_filter is None or sn in cur.sn_filter)

    def _count_request(self, sn: int, entry: SnEntry) -> list[Action]:
        lcn = self.mapping_cursor.lcn_id
        n = entry.requests.get(lcn, 0) + 1
        entry.requests[lcn] = n
        if n == self.params.debounce:
            entry.mapped.add(lcn)
            return [note(f"SN {sn} mapped to LCN {lcn}")]
        return [note(f"SN {sn} request {n} for LCN {lcn}")]

    def _map_check(self, now: float) -> list[Action]:
        cur = self.mapping_cursor
        if cur is None:
            return []
        undecided = [
            sn
            for sn, entry in self.sn_table.items()
            if 0 < entry.requests.get(cur.lcn_id, 0) < self.params.debounce
            and (cur.sn_filter is None or sn in cur.sn_filter)
        ]
        if undecided:
            return [self.timers.arm("map_check", now + self.params.sense_period)]
        return self._close_window(now)

    def _close_window(self, now: float) -> list[Action]:
        cur = self.mapping_cursor
        if cur is None:
            return []
        self.timers.cancel("map_check", "map_window")
        actions: list[Action] = []
        lcn = cur.lcn_id
        if lcn in self.lcn_table:
            if any(lcn in e.mapped for e in self.sn_table.values()):
                addr = self.lcn_table[lcn].hw_address
                actions += self._repeated(addr, Frame(FrameKind.LCN_RESTORE))
            else:
                # no sensor regulates this lamp, so it stays at full output
                actions.append(note(f"LCN {lcn} unclaimed, left at full output"))
        self.mapping_cursor = None
        return actions + self._next_window(now)

    # ----------------------------------------------------------- phase P4

    def _enter_p4(self, now: float) -> list[Action]:
        self.phase = Phase.P4_NORMAL
        if self.commissioned_at is None:
            self.commissioned_at = now
        return [
            note("phase P4_NORMAL"),
            self.timers.arm("audit", now + self.params.audit_period),
        ]

    def _on_request(self, frame: Frame, now: float) -> list[Action]:
        sn = frame.nibble
        if sn == 0:
            return drop("invalid id", frame)
        entry = self.sn_table.get(sn)
        if entry is None:
            return drop("unknown SN", frame)
        is_dec = frame.kind is FrameKind.SN_REQ_DEC
        if is_dec and self._counts_for_mapping(sn):
            return self._count_request(sn, entry)
        if self.phase is not Phase.P4_NORMAL:
            return drop("wrong phase", frame)
        if self.mapping_cursor is not None:
            # a lamp is being held at full output; relaying now would disturb it
            return drop("mapping window open", frame)
        targets = sorted(lcn for lcn in entry.mapped if lcn in self.lcn_table)
        if not targets:
            return drop("SN has no mapped LCN", frame)
        kind = FrameKind.LCN_STEP_DEC if is_dec else FrameKind.LCN_STEP_INC
        step = Frame(kind, self.params.step)
        return [Send(self.lcn_table[lcn].hw_address, step) for lcn in targets]

    def _on_pong(self, frame: Frame, dest: int, now: float) -> list[Action]:
        # LCNs never learn the master address and answer to broadcast;
        # sensors answer to the address they learned in P2.
        node_id = frame.nibble
        table = self.lcn_table if dest == BROADCAST else self.sn_table
        entry = table.get(node_id)
        if entry is None:
            return drop("pong from unknown node", frame)
        entry.last_seen, entry.responded = now, True
        return [note(f"{'LCN' if dest == BROADCAST else 'SN'} {node_id} present")]

    def topology_audit(self, now: float) -> list[Action]:
        """Close any open audit round, then ping every table entry.

        Also rebroadcasts the master address so unregistered sensors can
        join, and schedules the next audit.
        """
        if self.phase is not Phase.P4_NORMAL:
            return []
        actions = self.evaluate_audit(now)
        for lcn in sorted(self.lcn_table):
            entry = self.lcn_table[lcn]
            entry.responded = False
            actions.append(Send(entry.hw_address, Frame(FrameKind.TOPO_PING, lcn)))
        for sn in sorted(self.sn_table):
            self.sn_table[sn].responded = False
            actions.append(Send(BROADCAST, Frame(FrameKind.TOPO_PING, sn)))
        actions.append(self._bcast())
        self.audit_open = True
        actions.append(self.timers.arm("audit_eval", now + self.params.audit_window))
        actions.append(self.timers.arm("audit", now + self.params.audit_period))
        return actions

    def evaluate_audit(self, now: float) -> list[Action]:
        if not self.audit_open:
            return []
        self.audit_open = False
        self.timers.cancel("audit_eval")
        actions: list[Action] = []
        limit = self.params.eviction_misses
        for lcn in sorted(self.lcn_table):
            entry = self.lcn_table[lcn]
            entry.miss_count = 0 if entry.responded else entry.miss_count + 1
            if entry.miss_count >= limit:
                actions += self._evict_lcn(lcn, now)
        for sn in sorted(self.sn_table):
            entry = self.sn_table[sn]
            entry.miss_count = 0 if entry.responded else entry.miss_count + 1
            if entry.miss_count >= limit:
                del self.sn_table[sn]
                actions.append(note(f"SN {sn} evicted"))
        return actions

    def _evict_lcn(self, lcn: int, now: float) -> list[Action]:
        del self.lcn_table[lcn]
        for entry in self.sn_table.values():
            entry.mapped.discard(lcn)
            entry.requests.pop(lcn, None)
        actions: list[Action] = [note(f"LCN {lcn} evicted")]
        if self.mapping_cursor and self.mapping_cursor.lcn_id == lcn:
            actions += self._close_window(now)
        return actions


def mn_handle(state: MasterNode, event: Event) -> tuple[MasterNode, list[Action]]:
    nxt = copy.deepcopy(state)
    return nxt, nxt.handle(event)


def topology_audit(state: MasterNode, now: float) -> tuple[MasterNode, list[Action]]:
    nxt = copy.deepcopy(state)
    return nxt, nxt.topology_audit(now)
