import copy
import random

import pytest
from hypothesis import given, settings, strategies as st

from wsnlight.frame import BROADCAST, Frame, FrameKind, lcn_address, mn_address
from wsnlight.nodes import (
    ArmTimer,
    Boot,
    FrameRx,
    LightController,
    MasterNode,
    Phase,
    ProtocolParams,
    Send,
    SenseTick,
    SensorNode,
    SetDimLevel,
    TimerFired,
    TraceEvent,
    lcn_handle,
    mn_handle,
    sn_handle,
    topology_audit,
)
from wsnlight.nodes.master import Cursor, LcnEntry, SnEntry

K = ProtocolParams().levels


def sends(actions):
    return [a for a in actions if isinstance(a, Send)]


def drops(actions):
    return [a for a in actions if isinstance(a, TraceEvent) and a.tag == "drop"]


def same_state(a, b):
    """Dataclass equality, ignoring the RNG (which compares by identity)."""
    skip = {"rng"}
    return all(getattr(a, f) == getattr(b, f) for f in vars(a) if f not in skip)


def rx(kind, nibble=0, dest=BROADCAST, t=100.0):
    return FrameRx(Frame(kind, nibble), dest, t)


def p4_master(**sn_maps):
    lcns = {1: LcnEntry(1, 0.0), 4: LcnEntry(4, 0.0)}
    sns = {int(k[2:]): SnEntry(0.0, mapped=set(v)) for k, v in sn_maps.items()}
    return MasterNode(phase=Phase.P4_NORMAL, lcn_table=lcns, sn_table=sns)


# ------------------------------------------------------------------ master


def test_five_decreases_map_the_cursor_lamp():
    mn = MasterNode(
        phase=Phase.P3_MAPPING,
        lcn_table={1: LcnEntry(1, 0.0)},
        sn_table={2: SnEntry(0.0)},
        mapping_cursor=Cursor(1, None, 0.0),
    )
    for i in range(4):
        mn, _ = mn_handle(mn, rx(FrameKind.SN_REQ_DEC, 2, mn_address(1), t=float(i)))
        assert 1 not in mn.sn_table[2].mapped
    mn, _ = mn_handle(mn, rx(FrameKind.SN_REQ_DEC, 2, mn_address(1), t=5.0))
    assert mn.sn_table[2].mapped == {1}


def test_request_fans_out_to_every_mapped_lamp():
    mn = p4_master(sn2={1, 4})
    _, actions = mn_handle(mn, rx(FrameKind.SN_REQ_INC, 2, mn_address(1)))
    assert sends(actions) == [
        Send(lcn_address(1), Frame(FrameKind.LCN_STEP_INC, 1)),
        Send(lcn_address(4), Frame(FrameKind.LCN_STEP_INC, 1)),
    ]


def test_unknown_sensor_request_is_dropped():
    mn = p4_master(sn2={1})
    after, actions = mn_handle(mn, rx(FrameKind.SN_REQ_INC, 9, mn_address(1)))
    assert sends(actions) == []
    assert len(drops(actions)) == 1 and len(actions) == 1
    assert after == mn


def test_handshake_then_duplicate_hello_reuses_address():
    mn = MasterNode()
    mn, _ = mn_handle(mn, Boot(0.0))
    mn, actions = mn_handle(mn, rx(FrameKind.LCN_HELLO, 5, t=1.0))
    assert sends(actions) == [
        Send(BROADCAST, Frame(FrameKind.MN_ID_ECHO, 5)),
        Send(BROADCAST, Frame(FrameKind.MN_ADDR_SET, 1)),
    ]
    mn, _ = mn_handle(mn, rx(FrameKind.LCN_ADDR_ACK, 1, t=1.02))
    assert mn.lcn_table[5].hw_address == 0x11
    before = copy.deepcopy(mn.lcn_table)

    mn, actions = mn_handle(mn, rx(FrameKind.LCN_HELLO, 5, t=2.0))
    assert Send(BROADCAST, Frame(FrameKind.MN_ADDR_SET, 1)) in sends(actions)
    mn, _ = mn_handle(mn, rx(FrameKind.LCN_ADDR_ACK, 1, t=2.02))
    assert mn.lcn_table.keys() == before.keys()
    assert mn.lcn_table[5].addr_index == 1


def test_handshakes_are_serialised_and_addresses_unique():
    mn = MasterNode()
    mn, _ = mn_handle(mn, Boot(0.0))
    mn, a1 = mn_handle(mn, rx(FrameKind.LCN_HELLO, 3, t=1.0))
    mn, a2 = mn_handle(mn, rx(FrameKind.LCN_HELLO, 7, t=1.01))
    assert sends(a2) == []  # queued behind LCN 3
    mn, a3 = mn_handle(mn, rx(FrameKind.LCN_ADDR_ACK, 1, t=1.02))
    assert Send(BROADCAST, Frame(FrameKind.MN_ID_ECHO, 7)) in sends(a3)
    assert Send(BROADCAST, Frame(FrameKind.MN_ADDR_SET, 2)) in sends(a3)
    mn, _ = mn_handle(mn, rx(FrameKind.LCN_ADDR_ACK, 2, t=1.04))
    assert {e.hw_address for e in mn.lcn_table.values()} == {0x11, 0x12}


def test_phase_progression_on_full_tables():
    params = ProtocolParams(expected_lcns=1, expected_sns=1)
    mn = MasterNode(params=params)
    mn, _ = mn_handle(mn, Boot(0.0))
    mn, _ = mn_handle(mn, rx(FrameKind.LCN_HELLO, 2, t=1.0))
    mn, actions = mn_handle(mn, rx(FrameKind.LCN_ADDR_ACK, 1, t=1.02))
    assert mn.phase is Phase.P2_SN_REG
    assert Send(BROADCAST, Frame(FrameKind.MN_BCAST, 1)) in sends(actions)
    mn, actions = mn_handle(mn, rx(FrameKind.SN_ACK, 4, mn_address(1), t=1.1))
    assert mn.phase is Phase.P3_MAPPING
    assert mn.mapping_cursor.lcn_id == 2
    assert Send(0x11, Frame(FrameKind.LCN_SET_MAX)) in sends(actions)


def test_phase_timers_advance_without_nodes():
    mn = MasterNode()
    mn, actions = mn_handle(mn, Boot(0.0))
    p1 = next(a for a in actions if isinstance(a, ArmTimer))
    mn, actions = mn_handle(mn, TimerFired("p1", p1.at))
    assert mn.phase is Phase.P2_SN_REG
    mn, _ = mn_handle(mn, TimerFired("p2", p1.at + mn.params.p2_timer))
    # nothing to map, straight to normal operation
    assert mn.phase is Phase.P4_NORMAL


def test_stale_timer_is_ignored():
    mn = MasterNode()
    mn, _ = mn_handle(mn, Boot(0.0))
    after, actions = mn_handle(mn, TimerFired("p1", 3.0))
    assert actions == [] and after.phase is Phase.P1_LCN_REG


def test_requests_are_held_while_a_mapping_window_is_open():
    mn = p4_master(sn2={1})
    mn.mapping_cursor = Cursor(4, frozenset({9}), 0.0)
    _, actions = mn_handle(mn, rx(FrameKind.SN_REQ_DEC, 2, mn_address(1)))
    assert sends(actions) == [] and len(drops(actions)) == 1


def test_mn_handle_is_pure():
    mn = p4_master(sn2={1, 4})
    snapshot = copy.deepcopy(mn)
    a = mn_handle(mn, rx(FrameKind.SN_REQ_INC, 2, mn_address(1)))
    b = mn_handle(mn, rx(FrameKind.SN_REQ_INC, 2, mn_address(1)))
    assert mn == snapshot
    assert a == b


# ---------------------------------------------------------------- topology


def test_audit_with_everyone_present_resets_misses():
    mn = p4_master(sn2={1})
    mn.lcn_table[1].miss_count = 2
    mn, actions = topology_audit(mn, 60.0)
    pings = [s for s in sends(actions) if s.frame.kind is FrameKind.TOPO_PING]
    assert len(pings) == 3
    assert Send(BROADCAST, Frame(FrameKind.MN_BCAST, 1)) in sends(actions)
    for lcn in (1, 4):
        mn, _ = mn_handle(mn, rx(FrameKind.TOPO_PONG, lcn, BROADCAST, t=60.1))
    mn, _ = mn_handle(mn, rx(FrameKind.TOPO_PONG, 2, mn_address(1), t=60.1))
    mn, _ = mn_handle(mn, TimerFired("audit_eval", 61.0))
    assert set(mn.lcn_table) == {1, 4} and set(mn.sn_table) == {2}
    assert all(e.miss_count == 0 for e in mn.lcn_table.values())
    assert mn.sn_table[2].miss_count == 0


def test_silent_lamp_is_evicted_after_three_audits():
    mn = p4_master(sn2={1, 4})
    for k in range(1, 4):
        now = 60.0 * k
        mn, _ = topology_audit(mn, now)
        mn, _ = mn_handle(mn, rx(FrameKind.TOPO_PONG, 1, BROADCAST, t=now + 0.1))
        mn, _ = mn_handle(mn, rx(FrameKind.TOPO_PONG, 2, mn_address(1), t=now + 0.1))
        mn, _ = mn_handle(mn, TimerFired("audit_eval", now + 1.0))
        if k < 3:
            assert mn.lcn_table[4].miss_count == k
    assert 4 not in mn.lcn_table
    assert mn.sn_table[2].mapped == {1}


def test_sensor_joining_during_normal_operation():
    mn = p4_master(sn2={1})
    mn, actions = mn_handle(mn, rx(FrameKind.SN_ACK, 6, mn_address(1)))
    assert 6 in mn.sn_table
    assert mn.mapping_cursor is not None and mn.mapping_cursor.sn_filter == frozenset({6})
    assert mn.phase is Phase.P4_NORMAL


# ------------------------------------------------------------------ sensor


def test_sensor_registers_on_master_broadcast():
    sn = SensorNode(3)
    sn, actions = sn_handle(sn, rx(FrameKind.MN_BCAST, 1))
    assert sn.registered and sn.tx_dest == 0x01
    assert sends(actions) == [Send(0x01, Frame(FrameKind.SN_ACK, 3), delay=3 * sn.params.ack_slot)]


@pytest.mark.parametrize(
    "lux, expected",
    [(350, FrameKind.SN_REQ_INC), (405, None), (450, FrameKind.SN_REQ_DEC), (380, None), (420, None)],
)
def test_sensor_control_law(lux, expected):
    sn = SensorNode(2, target_lux=400, deadband_lux=20, tx_dest=0x01, registered=True)
    _, actions = sn_handle(sn, SenseTick(10.0, lux))
    if expected is None:
        assert actions == []
    else:
        assert actions == [Send(0x01, Frame(expected, 2))]


def test_sensor_rate_limit():
    sn = SensorNode(2, tx_dest=0x01, registered=True)
    sn, first = sn_handle(sn, SenseTick(10.0, 100))
    sn, second = sn_handle(sn, SenseTick(10.5, 100))
    sn, third = sn_handle(sn, SenseTick(11.0, 100))
    assert len(first) == 1 and second == [] and len(third) == 1


def test_unregistered_sensor_stays_quiet():
    assert sn_handle(SensorNode(2), SenseTick(1.0, 0.0))[1] == []


def test_sensor_drops_foreign_frames():
    sn = SensorNode(2, tx_dest=0x01, registered=True)
    for frame_rx in (rx(FrameKind.LCN_HELLO, 4), rx(FrameKind.TOPO_PING, 5)):
        _, actions = sn_handle(sn, frame_rx)
        assert len(actions) == 1 and len(drops(actions)) == 1
    _, actions = sn_handle(sn, rx(FrameKind.TOPO_PING, 2))
    assert sends(actions) == [Send(0x01, Frame(FrameKind.TOPO_PONG, 2))]


# -------------------------------------------------------------- controller


def commissioned_lcn(level=5, lcn_id=5, index=2):
    return LightController(lcn_id, level=level, rx_addr=lcn_address(index), commissioned=True)


def test_step_saturates_at_full_scale():
    lcn, actions = lcn_handle(commissioned_lcn(level=K), rx(FrameKind.LCN_STEP_INC, 1, 0x12))
    assert lcn.level == K
    assert not any(isinstance(a, SetDimLevel) for a in actions)
    lcn, actions = lcn_handle(commissioned_lcn(level=0), rx(FrameKind.LCN_STEP_DEC, 3, 0x12))
    assert lcn.level == 0


def test_set_max_then_restore():
    lcn = commissioned_lcn(level=3)
    lcn, actions = lcn_handle(lcn, rx(FrameKind.LCN_SET_MAX, 0, 0x12))
    assert lcn.level == K and SetDimLevel(K) in actions
    lcn, _ = lcn_handle(lcn, rx(FrameKind.LCN_SET_MAX, 0, 0x12))  # repeated command
    lcn, actions = lcn_handle(lcn, rx(FrameKind.LCN_RESTORE, 0, 0x12))
    assert lcn.level == 3 and SetDimLevel(3) in actions
    lcn, actions = lcn_handle(lcn, rx(FrameKind.LCN_RESTORE, 0, 0x12))
    assert lcn.level == 3


def test_foreign_echo_is_discarded():
    lcn = LightController(5)
    after, actions = lcn_handle(lcn, rx(FrameKind.MN_ID_ECHO, 7))
    assert same_state(after, lcn)
    assert len(drops(actions)) == 1


def test_controller_commissioning():
    lcn = LightController(5, rng=random.Random(1))
    lcn, actions = lcn_handle(lcn, Boot(0.0))
    assert actions[0] == SetDimLevel(lcn.params.initial_level)
    hello = actions[1]
    assert 0.5 <= hello.at <= 2.0
    lcn, actions = lcn_handle(lcn, TimerFired("hello", hello.at))
    assert sends(actions) == [Send(BROADCAST, Frame(FrameKind.LCN_HELLO, 5))]
    lcn, _ = lcn_handle(lcn, rx(FrameKind.MN_ID_ECHO, 5, t=3.0))
    lcn, actions = lcn_handle(lcn, rx(FrameKind.MN_ADDR_SET, 2, t=3.02))
    assert lcn.commissioned and lcn.rx_addr == 0x12
    assert sends(actions) == [Send(BROADCAST, Frame(FrameKind.LCN_ADDR_ACK, 2))]


def test_address_set_without_echo_is_ignored():
    lcn, actions = lcn_handle(LightController(5), rx(FrameKind.MN_ADDR_SET, 2))
    assert not lcn.commissioned and len(drops(actions)) == 1


def test_commands_for_other_addresses_are_ignored():
    lcn = commissioned_lcn(level=4)
    after, actions = lcn_handle(lcn, rx(FrameKind.LCN_STEP_INC, 1, 0x13))
    assert after.level == 4 and len(drops(actions)) == 1


def test_ping_answered_with_pong():
    _, actions = lcn_handle(commissioned_lcn(), rx(FrameKind.TOPO_PING, 5, 0x12))
    assert sends(actions) == [Send(BROADCAST, Frame(FrameKind.TOPO_PONG, 5))]


def test_watchdog_decommissions_a_forgotten_lamp():
    lcn = commissioned_lcn()
    lcn, actions = lcn_handle(lcn, rx(FrameKind.TOPO_PING, 5, 0x12, t=10.0))
    wd = next(a for a in actions if isinstance(a, ArmTimer) and a.kind == "watchdog")
    lcn, actions = lcn_handle(lcn, TimerFired("watchdog", wd.at))
    assert not lcn.commissioned and lcn.rx_addr == BROADCAST
    assert any(isinstance(a, ArmTimer) and a.kind == "hello" for a in actions)


# -------------------------------------------------------------- properties

frames = st.builds(
    lambda kind, nibble: Frame(kind, max(nibble, 1) if kind.name.startswith("LCN_STEP") else nibble),
    st.sampled_from(list(FrameKind)),
    st.integers(0, 15),
)
dests = st.sampled_from([BROADCAST, 0x01, 0x11, 0x12, 0x15, 0x33])


def _masters():
    fresh = MasterNode()
    fresh.handle(Boot(0.0))
    p3 = MasterNode(
        phase=Phase.P3_MAPPING,
        lcn_table={1: LcnEntry(1, 0.0)},
        sn_table={2: SnEntry(0.0)},
        mapping_cursor=Cursor(1, None, 0.0),
    )
    return [fresh, p3, p4_master(sn2={1, 4})]


def _nodes():
    return _masters() + [
        SensorNode(2),
        SensorNode(2, tx_dest=0x01, registered=True),
        LightController(5),
        commissioned_lcn(),
    ]


@settings(max_examples=300)
@given(st.integers(0, 6), frames, dests)
def test_every_frame_gets_a_response_and_drops_trace_once(which, frame, dest):
    node = _nodes()[which]
    before = copy.deepcopy(node)
    actions = node.handle(FrameRx(frame, dest, 50.0))
    assert len(actions) >= 1
    drop_events = drops(actions)
    assert len(drop_events) <= 1
    if drop_events:
        assert same_state(node, before)  # a discarded frame leaves the state alone


@settings(max_examples=100)
@given(st.lists(st.tuples(st.sampled_from(["hello", "ack"]), st.integers(1, 15)), max_size=40))
def test_lcn_addresses_stay_unique(script):
    mn = MasterNode()
    mn.handle(Boot(0.0))
    t = 0.1
    for what, n in script:
        kind = FrameKind.LCN_HELLO if what == "hello" else FrameKind.LCN_ADDR_ACK
        mn.handle(FrameRx(Frame(kind, n), BROADCAST, t))
        t += 0.01
        addrs = [e.hw_address for e in mn.lcn_table.values()]
        assert len(addrs) == len(set(addrs))
        assert all(a not in (0x00, 0xFF) for a in addrs)
        assert len(mn.lcn_table) <= 15
