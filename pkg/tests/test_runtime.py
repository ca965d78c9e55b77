"""Scheduler behavior: clock, polling cadence, rules pass, dispatch."""

from datetime import timedelta

import pytest

from smarthome.errors import HomeError
from smarthome.model import Tier
from smarthome.rules import parse_rule
from smarthome.runtime import Runtime
from smarthome.scenario import Scenario, ScenarioRef, parse_scenario
from tests.conftest import START


@pytest.fixture
def rt(home):
    reg, fleet = home
    return Runtime(reg, fleet, START)


def test_activation_returns_ticket_and_count(rt):
    act = rt.activate_scenario("Gather Dishes")
    assert act.ticket == 1
    assert act.scheduled == 5
    act2 = rt.activate_scenario("Watering Plants")
    assert act2.ticket == 2


def test_unknown_scenario_blocks(rt):
    with pytest.raises(HomeError) as err:
        rt.activate_scenario("Nope")
    assert err.value.code == "UNKNOWN_SCENARIO"


def test_disabled_scenario_blocks(rt):
    rt.reg.scenarios["Gather Dishes"].enabled = False
    with pytest.raises(HomeError) as err:
        rt.activate_scenario("Gather Dishes")
    assert err.value.code == "SCENARIO_DISABLED"


def test_structural_violations_block_activation(rt):
    bad = parse_scenario("Scenario name: Bad\nToaster: on @ Now\n")
    rt.reg.scenarios[bad.name] = bad
    with pytest.raises(HomeError) as err:
        rt.activate_scenario("Bad")
    assert err.value.code == "VALIDATION_FAILED"
    assert err.value.violations[0].code == "UNKNOWN_ACTOR"


def test_enablement_violations_note_then_skip_at_dispatch(rt):
    rt.reg.robots[3].enabled = False
    act = rt.activate_scenario("Gather Dishes")
    assert act.scheduled == 5
    assert any("ROBOT_DISABLED" in n for n in rt.notes)
    rt.run_for(1)
    first = rt.trace[0]
    assert first["outcome"] == "skipped"
    assert "disabled" in first["note"]


def test_reenabled_robot_dispatches_later_commands(rt):
    rt.reg.robots[3].enabled = False
    rt.activate_scenario("Gather Dishes")
    rt.run_for(1)
    rt.reg.robots[3].enabled = True
    rt.run_for(10 * 60)
    outcomes = [e["outcome"] for e in rt.trace]
    assert outcomes == ["skipped", "ok", "ok", "ok", "ok"]


def test_cancel_removes_pending(rt):
    act = rt.activate_scenario("Gather Dishes")
    rt.run_for(1)  # the Now command is gone already
    assert rt.cancel(act.ticket) == 4
    assert rt.cancel(act.ticket) == 0  # idempotent
    rt.run_for(10 * 60)
    assert len(rt.trace) == 1


def test_cancel_unknown_ticket(rt):
    with pytest.raises(HomeError) as err:
        rt.cancel(99)
    assert err.value.code == "UNKNOWN_TICKET"


def test_clock_never_goes_backwards(rt):
    rt.run_for(5)
    with pytest.raises(HomeError) as err:
        rt.tick(START)
    assert err.value.code == "CLOCK_ERROR"


def test_poll_counts_over_one_minute(rt):
    rt.run_for(60)
    by_tier = {}
    for rec in rt.reg.devices.values():
        by_tier.setdefault(rec.tier, set()).add(rt.poll_counts[rec.oid])
    assert by_tier[Tier.VITAL] == {60}
    assert by_tier[Tier.SECURITY] == {12}
    assert by_tier[Tier.AMBIENT] == {1}


def test_poll_cadence_configurable(home):
    reg, fleet = home
    rt = Runtime(reg, fleet, START, poll_seconds={"security": 2})
    rt.run_for(10)
    assert rt.poll_counts[4] == 5


def test_rules_pass_schedules_actions(rt):
    rule = parse_rule("when Temperature > 30 then Sprinkler 1: on @ Now",
                      rt.reg, "heat guard")
    rt.reg.rules[rule.name] = rule
    rt.run_for(60)
    fires = [e for e in rt.trace if e["provenance"] == ["heat guard"]]
    assert len(fires) == 2
    assert {e["t"] for e in fires} == {
        "2024-03-01T09:00:05+00:00", "2024-03-01T09:00:20+00:00"}


def test_rule_with_vanished_device_noted_not_crashed(rt):
    rule = parse_rule("when Temperature > 30 then Sprinkler 1: on @ Now",
                      rt.reg, "heat guard")
    rule.actions = tuple(list(rule.actions) + list(parse_rule(
        "when Temperature > 30 then Sprinkler 2: on @ Now", rt.reg, "x").actions))
    rt.reg.rules[rule.name] = rule
    del rt.reg.devices[2]  # Sprinkler 2 gone after the rule was stored
    rt.run_for(10)
    assert any("not dispatched" in n for n in rt.notes)
    assert all(e["outcome"] == "ok" or e["actor"] != "D1" for e in rt.trace)


def test_same_instant_conflict_noted(rt):
    s = parse_scenario(
        "Scenario name: Fight\nA. Sprinkler 1: on @ Now\nB. Sprinkler 1: off @ Now\n",
        rt.reg)
    rt.reg.scenarios[s.name] = s
    rt.activate_scenario("Fight")
    rt.run_for(1)
    assert any(n.startswith("CONFLICT") for n in rt.notes)
    # both still executed, in listing order
    assert [e["verb"] for e in rt.trace] == ["on", "off"]


def test_duplicate_same_command_not_flagged(rt):
    s = parse_scenario(
        "Scenario name: Same\nA. Sprinkler 1: on @ Now\nB. Sprinkler 1: on @ Now\n",
        rt.reg)
    rt.reg.scenarios[s.name] = s
    rt.activate_scenario("Same")
    rt.run_for(1)
    assert not any(n.startswith("CONFLICT") for n in rt.notes)


def test_trace_entry_shape(rt):
    rt.activate_scenario("Gather Dishes")
    rt.run_for(8 * 60)
    entry = rt.trace[0]
    assert set(entry) == {"t", "actor", "verb", "outcome", "provenance", "param"}
    assert entry["actor"] == "R3"
    assert entry["t"].endswith("+00:00")
    delegated = [e for e in rt.trace if ">" in e["actor"]]
    assert not delegated  # none in this scenario


def test_delegation_actor_code(rt):
    rt.activate_scenario("Clean Home", START)  # nested block lands after 10:00
    rt.run_for(66 * 60)
    codes = {e["actor"] for e in rt.trace}
    assert "R2>D3" in codes


def test_commands_due_at_activation_dispatch_without_tick(rt):
    rt.activate_scenario("Gather Dishes")
    rt.tick(rt.now)
    assert [e["verb"] for e in rt.trace] == ["GoTo"]


def test_trace_lines_are_stable_json(rt):
    rt.activate_scenario("Gather Dishes")
    rt.run_for(8 * 60)
    lines = rt.trace_lines()
    assert all(line.startswith('{"actor":') for line in lines)


def test_write_trace_file(rt, tmp_path):
    rt.activate_scenario("Watering Plants", START)
    rt.run_for(1)
    path = str(tmp_path / "trace.jsonl")
    rt.write_trace(path)
    with open(path) as fh:
        content = fh.read()
    assert content == "" or content.endswith("\n")
