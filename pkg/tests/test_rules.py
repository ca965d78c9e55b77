"""Rule grammar, typing against the device registry, and edge triggering."""

import random

import pytest

from smarthome.errors import ParseError
from smarthome.model import (
    Category,
    DeviceRecord,
    Kind,
    ParamDomain,
    Registry,
    Status,
    Tier,
)
from smarthome.rules import (
    And,
    Atom,
    Not,
    Or,
    RuleDef,
    evaluate,
    parse_rule,
    print_rule,
    rule_from_json,
    rule_to_json,
)


def _sensors() -> Registry:
    reg = Registry()
    reg.register_device(DeviceRecord(
        oid=1, name="Temperature", kind=Kind.SENSOR, category=Category.LEVELED,
        verbs={}, tier=Tier.SECURITY, level_range=(0, 50)))
    reg.register_device(DeviceRecord(
        oid=2, name="Front door", kind=Kind.SENSOR, category=Category.OPENED_CLOSED,
        verbs={}, tier=Tier.SECURITY))
    reg.register_device(DeviceRecord(
        oid=3, name="Motion", kind=Kind.SENSOR,
        category=Category.APPEARING_DISAPPEARING, verbs={}, tier=Tier.SECURITY))
    reg.register_device(DeviceRecord(
        oid=4, name="Lamp", kind=Kind.ACTUATOR, category=Category.ON_OFF,
        verbs={"on": ParamDomain.NONE, "off": ParamDomain.NONE}, tier=Tier.AMBIENT))
    return reg


@pytest.fixture
def sensors():
    return _sensors()


def test_parse_simple_comparison(sensors):
    r = parse_rule("when Temperature > 30 then Lamp: on @ Now", sensors)
    assert r.condition == Atom("Temperature", 1, ">", "30")
    assert len(r.actions) == 1


def test_parse_unicode_comparators(sensors):
    r = parse_rule("when Temperature ≥ 30 then Lamp: on @ Now", sensors)
    assert r.condition.op == ">="
    r = parse_rule("when Temperature ≠ 30 then Lamp: on @ Now", sensors)
    assert r.condition.op == "!="


def test_and_binds_tighter_than_or(sensors):
    r = parse_rule(
        "when Front door = Opened or Motion = Present and Temperature > 30 "
        "then Lamp: on @ Now", sensors)
    assert isinstance(r.condition, Or)
    assert isinstance(r.condition.args[1], And)


def test_parens_and_not(sensors):
    r = parse_rule(
        "when not (Front door = Opened or Motion = Present) then Lamp: on @ Now",
        sensors)
    assert isinstance(r.condition, Not)
    assert isinstance(r.condition.arg, Or)


def test_label_sensors_reject_ordering_comparators(sensors):
    with pytest.raises(ParseError):
        parse_rule("when Front door > Opened then Lamp: on @ Now", sensors)


def test_label_value_canonicalized(sensors):
    r = parse_rule("when Front door = opened then Lamp: on @ Now", sensors)
    assert r.condition.value == "Opened"
    with pytest.raises(ParseError):
        parse_rule("when Front door = Ajar then Lamp: on @ Now", sensors)


def test_leveled_sensor_requires_integer(sensors):
    with pytest.raises(ParseError):
        parse_rule("when Temperature > warm then Lamp: on @ Now", sensors)


def test_unknown_sensor_rejected(sensors):
    with pytest.raises(ParseError):
        parse_rule("when Ghost = On then Lamp: on @ Now", sensors)


def test_actuator_cannot_be_condition(sensors):
    with pytest.raises(ParseError) as err:
        parse_rule("when Lamp = On then Lamp: off @ Now", sensors)
    assert "actuator" in str(err.value)


def test_comparator_typing_reported_before_actuator_kind(sensors):
    # a bad comparator on an actuator name complains about the comparator
    with pytest.raises(ParseError) as err:
        parse_rule("when Lamp > 3 then Lamp: off @ Now", sensors)
    assert ">" in str(err.value) or "comparator" in str(err.value).lower()


def test_then_clause_multiple_tasks(sensors):
    r = parse_rule(
        "when Temperature > 30 then Lamp: on @ Now; Lamp: off @ In 10 Minutes",
        sensors)
    assert [t.verb for t in r.actions] == ["on", "off"]


def test_print_parse_identity(sensors):
    texts = [
        "when Temperature > 30 then Lamp: on @ Now",
        "when (Front door = Opened or Motion = Present) and Temperature >= 20 "
        "then Lamp: on @ Now",
        "when not Front door = Closed then Lamp: on @ Now; Lamp: off @ 22:15",
    ]
    for text in texts:
        rule = parse_rule(text, sensors, name="x")
        again = parse_rule(print_rule(rule), sensors, name="x")
        assert again.condition == rule.condition
        assert again.actions == rule.actions


def test_multiword_sensor_names(sensors):
    r = parse_rule("when Front door != Closed then Lamp: on @ Now", sensors)
    assert r.condition.oid == 2


# -- edge triggering ----------------------------------------------------------

def test_fires_only_on_false_to_true(sensors):
    rule = parse_rule("when Temperature > 30 then Lamp: on @ Now", sensors, "r")
    seq = [25, 31, 32, 29, 31]
    fired = 0
    for v in seq:
        sensors.devices[1].status = Status.level(v)
        fired += len(evaluate([rule], sensors.devices))
    assert fired == 2


def test_first_evaluation_can_fire(sensors):
    rule = parse_rule("when Temperature > 30 then Lamp: on @ Now", sensors, "r")
    sensors.devices[1].status = Status.level(40)
    assert evaluate([rule], sensors.devices) == [rule]
    assert evaluate([rule], sensors.devices) == []


def test_disabled_rule_holds_state(sensors):
    rule = parse_rule("when Temperature > 30 then Lamp: on @ Now", sensors, "r")
    sensors.devices[1].status = Status.level(40)
    assert evaluate([rule], sensors.devices) == [rule]
    rule.enabled = False
    sensors.devices[1].status = Status.level(10)
    assert evaluate([rule], sensors.devices) == []
    rule.enabled = True
    # state was frozen at True, so returning above threshold is not an edge
    sensors.devices[1].status = Status.level(40)
    assert evaluate([rule], sensors.devices) == []


def test_random_traces_match_edge_oracle():
    rnd = random.Random(0xED6E)
    for _ in range(1000):
        reg = _sensors()
        rule = parse_rule("when Temperature > 30 then Lamp: on @ Now", reg, "r")
        trace = [rnd.randrange(0, 50) for _ in range(rnd.randint(1, 30))]
        prev = None
        for v in trace:
            reg.devices[1].status = Status.level(v)
            fired = bool(evaluate([rule], reg.devices))
            state = v > 30
            assert fired == (state and prev is not True)
            prev = state


def test_busy_leveled_sensor_reads_false(sensors):
    rule = parse_rule("when Temperature > 30 then Lamp: on @ Now", sensors, "r")
    sensors.devices[1].status = Status.busy("calibration")
    assert evaluate([rule], sensors.devices) == []


def test_missing_sensor_reads_false_with_note(sensors):
    rule = parse_rule("when Temperature > 30 then Lamp: on @ Now", sensors, "r")
    del sensors.devices[1]
    notes = []
    assert evaluate([rule], sensors.devices, notes) == []
    assert notes and "Temperature" in notes[0]


def test_rule_json_round_trip(sensors):
    rule = parse_rule(
        "when (Front door = Opened or Motion = Present) and Temperature >= 20 "
        "then Lamp: on @ Now; Lamp: off @ In 10 Minutes", sensors, "night guard")
    rule.enabled = False
    back = rule_from_json(rule_to_json(rule))
    assert back == RuleDef("night guard", rule.condition, rule.actions, False)
