import pytest

from wsnlight import presets
from wsnlight.engine import END, EventQueue, parse_trace_line, report_from_trace, simulate
from wsnlight.errors import ValidationError
from wsnlight.plant import Room
from wsnlight.scenario import (
    NodeSpec,
    Scenario,
    dump_scenario,
    errors_only,
    load_scenario,
    scenario_from_dict,
    scenario_to_dict,
    validate,
)


def test_queue_orders_by_time_then_insertion():
    q = EventQueue()
    q.schedule(2.0, "b")
    q.schedule(1.0, "a")
    q.schedule(2.0, "c")
    q.schedule(0.5, "z")
    order = [q.next_event()[2] for _ in range(len(q))]
    assert order == ["z", "a", "b", "c"]


def test_end_of_run_goes_after_same_time_events():
    q = EventQueue()
    q.schedule(5.0, END)
    q.schedule(5.0, "timer")
    q.schedule(5.0, "tx")
    assert [q.next_event()[2] for _ in range(3)] == ["timer", "tx", END]


def test_duplicate_lcn_is_rejected():
    s = presets.table2(duration=10)
    s = s.replace(lcns=s.lcns + [NodeSpec(3)])
    diags = errors_only(validate(s))
    assert any("duplicate LCN id 3" in d.message for d in diags)
    with pytest.raises(ValidationError):
        simulate(s)


def test_too_many_sensors_cites_id_space():
    s = presets.table2(duration=10)
    s = s.replace(sns=[NodeSpec(i) for i in range(1, 17)])
    messages = [d.message for d in errors_only(validate(s))]
    assert any("4-bit" in m for m in messages)


def test_tight_deadband_is_only_a_warning():
    s = presets.table2(duration=10).with_protocol(deadband_lux=5.0)
    diags = validate(s)
    assert diags and not errors_only(diags)
    assert all(d.severity == "warning" and d.path == "protocol.deadband_lux" for d in diags)


def test_sound_builtins_validate_clean():
    for make in presets.BUILTIN.values():
        assert errors_only(validate(make())) == []


def test_master_alone_records_only_itself():
    s = Scenario(room=Room(sensors=(), lamps=(), coupling=()), duration=10.0)
    result = simulate(s)
    assert {r.node for r in result.trace} == {"MN1"}
    assert result.report.total_wh_day == 0.0
    assert result.report.per_lamp_wh == {}
    assert all(r.time <= 10.0 for r in result.trace)


def test_same_seed_same_trace():
    s = presets.two_coupling(duration=120, seed=3, p_loss=0.1)
    assert simulate(s).trace_text() == simulate(s).trace_text()


def test_seed_changes_trace_under_loss():
    a = presets.two_coupling(duration=120, seed=1, p_loss=0.1)
    b = a.replace(seed=2)
    assert simulate(a).trace_text() != simulate(b).trace_text()


def test_trace_sink_matches_kept_trace():
    s = presets.two_coupling(duration=60)
    streamed = []
    kept = simulate(s, keep_trace=True).trace
    quiet = simulate(s, keep_trace=False, trace_sink=streamed.append)
    assert streamed == kept
    assert quiet.trace is None


def test_trace_lines_parse_back():
    result = simulate(presets.two_coupling(duration=60))
    for rec in result.trace[:200]:
        assert parse_trace_line(rec.format()).format() == rec.format()


def test_report_can_be_rebuilt_from_trace():
    s = presets.table2(duration=86_400.0)
    result = simulate(s)
    rebuilt = report_from_trace(result.trace, s)
    assert rebuilt.total_wh_day == pytest.approx(result.report.total_wh_day, rel=1e-9)
    assert rebuilt.per_lamp_wh == pytest.approx(result.report.per_lamp_wh, rel=1e-9)


def test_yaml_round_trip(tmp_path):
    s = presets.churn()
    path = tmp_path / "churn.yaml"
    dump_scenario(s, path)
    back = load_scenario(path)
    assert scenario_to_dict(back) == scenario_to_dict(s)
    assert scenario_from_dict(scenario_to_dict(s)) == s


def test_shipped_scenarios_load(tmp_path):
    from importlib.resources import files

    for name in ("office_day.yaml", "two_coupling.yaml"):
        s = load_scenario(files("wsnlight") / "scenarios" / name)
        assert errors_only(validate(s)) == []


def test_malformed_yaml(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("room: [unclosed\n")
    with pytest.raises(ValidationError):
        load_scenario(path)


def test_killed_lamp_goes_dark_and_stops_talking():
    result = simulate(presets.churn(duration=900))  # LCN2 dies at 450 s
    late = [r for r in result.trace if r.node == "LCN2" and r.time >= 450.0]
    assert late and all(r.direction not in ("tx", "rx") for r in late)
    assert [lvl for t, lamp, lvl in result.level_trace if lamp == 2][-1] == 0
