"""Wire protocol: request codec, auth handshake, map/SMS codecs, page routing."""

import random
import string
from datetime import timedelta
from hashlib import sha256

import pytest

from smarthome.errors import HomeError
from smarthome.model import (
    Category,
    DeviceRecord,
    Kind,
    MapIcon,
    MapPolyline,
    Status,
    Tier,
    UserCred,
)
from smarthome.runtime import Runtime
from smarthome.scenario import (
    Action,
    Actor,
    Scenario,
    ScenarioRef,
    TimeSpec,
    parse_scenario,
)
from smarthome.wire import (
    RequestEnvelope,
    ServerConfig,
    ServerCore,
    SessionTable,
    authenticate,
    decode_devices,
    decode_map,
    decode_request,
    decode_sms,
    decrypt_magic,
    derive_digest,
    encode_map,
    encode_request,
    encode_sms_scenario,
    hash_credentials,
    icon_for,
    issue_magic,
    keystream,
)
from tests.conftest import START


# -- request lines -------------------------------------------------------------

def test_decode_request_basic():
    env = decode_request("scenario.aspx?action=list&name=Clean%20Home")
    assert env.page == "scenario.aspx"
    assert env.params == [("action", "list"), ("name", "Clean Home")]


def test_decode_request_no_query():
    env = decode_request("devices.aspx")
    assert env.page == "devices.aspx" and env.params == []


def test_decode_request_tolerates_empty_segments():
    env = decode_request("p.aspx?a=1&&b=2&")
    assert env.params == [("a", "1"), ("b", "2")]


def test_decode_request_bare_key_is_empty_value():
    env = decode_request("p.aspx?flag")
    assert env.params == [("flag", "")]


def test_decode_request_rejections():
    for bad in ("p.aspx?=v", "p.aspx?a=1&a=2", "?x=1", "p.aspx?a=%zz", "p.aspx?%2=x"):
        with pytest.raises(HomeError) as err:
            decode_request(bad)
        assert err.value.code == "MALFORMED_REQUEST"


def test_request_round_trip_random():
    rnd = random.Random(0xC0DEC)
    alphabet = string.ascii_letters + string.digits + " &=?%/|:@+é世"
    for _ in range(1000):
        page = "".join(rnd.choices(string.ascii_lowercase, k=rnd.randint(1, 8))) + ".aspx"
        n = rnd.randint(0, 5)
        keys = rnd.sample([f"k{i}" for i in range(10)], n)
        params = [(k, "".join(rnd.choices(alphabet, k=rnd.randint(0, 12)))) for k in keys]
        env = decode_request(encode_request(page, params))
        assert env.page == page and env.params == params


def test_envelope_require():
    env = RequestEnvelope("p", [("a", "1")])
    assert env.require("a") == "1"
    with pytest.raises(HomeError) as err:
        env.require("b")
    assert err.value.code == "MALFORMED_REQUEST"


# -- auth ------------------------------------------------------------------------

def test_keystream_is_hash_of_secret_and_nonce():
    nonce = bytes(range(16))
    block = sha256(b"k" + nonce).digest()[:16]
    assert keystream("k", nonce, 16) == block
    assert keystream("k", nonce, 40) == (block * 3)[:40]


def test_issue_and_decrypt_magic():
    table = SessionTable(ttl=300)
    nonce, cipher = issue_magic("24680", START, "24680", "secret", table)
    magic = decrypt_magic("secret", nonce, cipher)
    assert len(magic) == 32 and magic in table.sessions
    assert int(magic, 16) >= 0  # hex


def test_bad_installation_code():
    table = SessionTable()
    with pytest.raises(HomeError) as err:
        issue_magic("11111", START, "24680", "secret", table)
    assert err.value.code == "BADCODE"
    assert not table.sessions


def _creds(users, user, magic):
    return hash_credentials(user, users[user].digest, magic)


def _users():
    return {"admin": UserCred("admin", derive_digest("salt", "admin", "pw"))}


def test_authenticate_lifecycle():
    users = _users()
    table = SessionTable(ttl=300)
    session = table.issue(START)
    env = RequestEnvelope("p", [("user", "admin"),
                                ("auth", _creds(users, "admin", session.magic))])
    # inside ttl, boundary inclusive
    assert authenticate(env, users, table, START + timedelta(seconds=299))[0] == "admin"
    assert authenticate(env, users, table, START + timedelta(seconds=300))[0] == "admin"
    with pytest.raises(HomeError) as err:
        authenticate(env, users, table, START + timedelta(seconds=301))
    assert err.value.code == "EXPIRED"


def test_wrong_password_is_auth_not_expired():
    users = _users()
    table = SessionTable(ttl=300)
    session = table.issue(START)
    env = RequestEnvelope("p", [
        ("user", "admin"),
        ("auth", hash_credentials("admin", derive_digest("salt", "admin", "wrong"),
                                  session.magic))])
    with pytest.raises(HomeError) as err:
        authenticate(env, users, table, START)
    assert err.value.code == "AUTH"


def test_unknown_user_is_auth():
    table = SessionTable()
    table.issue(START)
    env = RequestEnvelope("p", [("user", "ghost"), ("auth", "00" * 32)])
    with pytest.raises(HomeError) as err:
        authenticate(env, _users(), table, START)
    assert err.value.code == "AUTH"


def test_stale_magic_after_reissue_is_auth():
    # a new handshake prunes expired sessions, so the old digest no
    # longer matches anything: AUTH, not EXPIRED
    users = _users()
    table = SessionTable(ttl=300)
    old = table.issue(START)
    env = RequestEnvelope("p", [("user", "admin"),
                                ("auth", _creds(users, "admin", old.magic))])
    issue_magic("1", START + timedelta(seconds=400), "1", "s", table)
    with pytest.raises(HomeError) as err:
        authenticate(env, users, table, START + timedelta(seconds=401))
    assert err.value.code == "AUTH"


def test_auth_state_machine_random_walk():
    """Random handshake/advance/request walks against a naive oracle."""
    rnd = random.Random(0xA07)
    users = _users()
    for _ in range(200):
        table = SessionTable(ttl=300)
        sessions = []  # (magic, issued_at) oracle copy
        now = START
        for _ in range(rnd.randint(1, 15)):
            move = rnd.random()
            if move < 0.3:
                issue_magic("1", now, "1", "s", table)
                # oracle prunes exactly like the table
                sessions = [(m, t) for m, t in sessions
                            if (now - t).total_seconds() <= 300]
                new = [m for m in table.sessions if m not in {m for m, _ in sessions}]
                sessions.extend((m, table.sessions[m].issued_at) for m in new)
            elif move < 0.6 or not sessions:
                now += timedelta(seconds=rnd.randint(1, 200))
            else:
                magic, issued = rnd.choice(sessions)
                env = RequestEnvelope("p", [("user", "admin"),
                                            ("auth", _creds(users, "admin", magic))])
                alive_in_table = magic in table.sessions
                fresh = (now - issued).total_seconds() <= 300
                if alive_in_table and fresh:
                    assert authenticate(env, users, table, now)[0] == "admin"
                else:
                    with pytest.raises(HomeError) as err:
                        authenticate(env, users, table, now)
                    expected = "EXPIRED" if alive_in_table else "AUTH"
                    assert err.value.code == expected


# -- map codec --------------------------------------------------------------------

def test_wall_line_packs_width_and_color_first():
    wall = MapPolyline(2, (128, 64, 32), [(0, 0), (50, 0)])
    line = encode_map([wall], [])[0]
    assert line == "WALL|2,128;64,32;0,0;50,0"
    walls, _ = decode_map([line])
    assert walls[0] == wall


def test_map_round_trip_random():
    rnd = random.Random(0x3A9)
    for _ in range(1000):
        walls = [MapPolyline(rnd.randint(1, 9),
                             (rnd.randrange(256), rnd.randrange(256), rnd.randrange(256)),
                             [(rnd.randrange(500), rnd.randrange(500))
                              for _ in range(rnd.randint(2, 6))])
                 for _ in range(rnd.randint(0, 4))]
        icons = [MapIcon(rnd.randrange(20), f"I {rnd.randrange(99)}",
                         (rnd.randrange(500), rnd.randrange(500)),
                         rnd.choice(["lamp_on", "door_closed", "x"]))
                 for _ in range(rnd.randint(0, 5))]
        back_walls, back_icons = decode_map(encode_map(walls, icons))
        assert back_walls == walls and back_icons == icons


def test_decode_map_rejects_malformed():
    bad_lines = [
        ["WALL|2,128;64,32;0,0"],          # 3 points: no vertex pair
        ["WALL|a,b;64,32;0,0;50,0"],       # non-integer
        ["ICON|1|Name|3,4"],               # missing icon id field
        ["ICON|-2|Name|3,4|lamp"],         # negative oid
        ["ICON|x|Name|3,4|lamp"],          # non-integer oid
    ]
    for lines in bad_lines:
        with pytest.raises(HomeError) as err:
            decode_map(lines)
        assert err.value.code == "MALFORMED_MAP"


def test_decode_map_ignores_foreign_lines(reg):
    lines = ["OK"] + encode_map(reg.map_walls, reg.map_icons) + ["STAT|1|x|Off"]
    walls, icons = decode_map(lines)
    assert len(walls) == len(reg.map_walls) and len(icons) == len(reg.map_icons)


def test_icon_for_levels_and_shapes():
    rec = DeviceRecord(oid=1, name="T", kind=Kind.SENSOR, category=Category.LEVELED,
                       verbs={}, tier=Tier.SECURITY, icon="thermo", level_range=(0, 50))
    rec.status = Status.level(0)
    assert icon_for(rec) == "thermo_0"
    rec.status = Status.level(50)
    assert icon_for(rec) == "thermo_9"
    rec.status = Status.level(25)
    assert icon_for(rec) == "thermo_4"
    rec.status = Status.busy("calibrating")
    assert icon_for(rec) == "thermo_busy"
    door = DeviceRecord(oid=2, name="D", kind=Kind.SENSOR, category=Category.OPENED_CLOSED,
                        verbs={}, tier=Tier.SECURITY)
    door.status = Status.aperture(True)
    assert icon_for(door) == "aperture_open"  # category fallback, no icon set


def test_status_icons_refresh_from_live_devices(reg):
    reg.set_status(1, Status.binary(True), START)
    line = [l for l in encode_map(reg.map_walls, reg.map_icons, reg.devices)
            if l.startswith("ICON|1|")][0]
    assert line.endswith("|sprinkler_on")


# -- capability lines ---------------------------------------------------------------

def _core(home, users=(("admin", "123456"),), phones=("+15550100",)):
    reg, fleet = home
    rt = Runtime(reg, fleet, START)
    config = ServerConfig(shared_secret="sekrit", special_code="24680",
                          credential_salt="s1", users=tuple(users),
                          allowed_phones=tuple(phones))
    reg.allowed_phones.update(phones)
    return ServerCore(reg, fleet, rt, config)


@pytest.fixture
def core(home):
    return _core(home)


def _login_params(core, at=START):
    nonce, cipher = issue_magic("24680", at, "24680", "sekrit", core.sessions)
    magic = decrypt_magic("sekrit", nonce, cipher)
    digest = derive_digest("s1", "admin", "123456")
    return [("user", "admin"), ("auth", hash_credentials("admin", digest, magic))]


def _get(core, page, params=(), at=START):
    return core.handle_line(encode_request(page, list(_login_params(core, at)) + list(params)), at)


def test_decode_devices_round_trip(core):
    lines = _get(core, "devices.aspx")
    assert lines[0] == "OK"
    view = decode_devices(lines[1:])
    assert view.devices.keys() == core.reg.devices.keys()
    assert view.robots.keys() == core.reg.robots.keys()
    assert view.robots[2].delegations == core.reg.robots[2].delegations
    for oid, rec in view.devices.items():
        assert rec.verbs.keys() == core.reg.devices[oid].verbs.keys()


def test_disabled_markers_in_capability_lines(core):
    core.reg.robots[1].action_enabled["Clean"] = False
    core.reg.robots[1].enabled = False
    line = [l for l in _get(core, "devices.aspx") if l.startswith("ROB|1")][0]
    assert "|0|" in line and "Clean(location)!" in line
    view = decode_devices(_get(core, "devices.aspx")[1:])
    assert view.robots[1].enabled is False
    assert view.robots[1].action_enabled == {"Clean": False}


# -- SMS codec ------------------------------------------------------------------------

def test_sms_encoding_of_demo_scenario(reg):
    body = encode_sms_scenario(reg.scenarios["Gather Dishes"], reg)
    assert body == ("SC|Gather Dishes|R3:GoTo(Saloon)@N;R3:PickUp(Dishes)@+2;"
                    "R3:GoTo(Kitchen)@+5;R3:PutInto(WashingMachine)@+6;"
                    "R3:GoTo(DefaultPosition)@+7")
    assert decode_sms(body, reg) == reg.scenarios["Gather Dishes"]


def test_sms_nested_reference_form(reg):
    body = encode_sms_scenario(reg.scenarios["Clean Home"], reg)
    assert "[Gather Dishes]@1000" in body
    assert decode_sms(body, reg) == reg.scenarios["Clean Home"]


def test_sms_too_long_rejected(reg):
    tasks = [Action(Actor.for_device("Sprinkler 1"), "on", None, TimeSpec.after(i + 1))
             for i in range(30)]
    with pytest.raises(HomeError) as err:
        encode_sms_scenario(Scenario("Long", tasks), reg)
    assert err.value.code == "SMS_TOO_LONG"


def test_sms_decode_rejects_unknown_ids(reg):
    from smarthome.errors import ParseError
    with pytest.raises(ParseError):
        decode_sms("SC|X|D99:on@N", reg)
    with pytest.raises(ParseError):
        decode_sms("SC|X|R9:GoTo(Home)@N", reg)
    with pytest.raises(ParseError):
        decode_sms("SC|X|what@N", reg)
    with pytest.raises(ParseError):
        decode_sms("HI|X|D1:on@N", reg)


def _random_small_scenario(rnd, reg, n):
    """Valid random scenario over the demo home (structurally sound)."""
    choices = [
        lambda: Action(Actor.for_device(rnd.choice(["Sprinkler 1", "Sprinkler 2",
                                                    "Washing machine"])),
                       rnd.choice(["on", "off"]), None, _random_time(rnd)),
        lambda: Action(Actor.robot_self("Mover robot"), "GoTo",
                       rnd.choice(["Saloon", "Kitchen"]), _random_time(rnd)),
        lambda: Action(Actor.robot_on_device("Home robot", "Washing machine"),
                       rnd.choice(["on", "off"]), None, _random_time(rnd)),
        lambda: ScenarioRef("Gather Dishes",
                            None if rnd.random() < 0.5 else _random_time(rnd)),
    ]
    return Scenario(f"T {n}", [rnd.choice(choices)() for _ in range(rnd.randint(1, 3))])


def _random_time(rnd):
    roll = rnd.random()
    if roll < 0.4:
        return TimeSpec.now()
    if roll < 0.7:
        return TimeSpec.after(rnd.randint(1, 120))
    return TimeSpec.at(rnd.randrange(24), rnd.randrange(60))


def test_sms_round_trip_random(reg):
    rnd = random.Random(0x535)
    for n in range(1000):
        scn = _random_small_scenario(rnd, reg, n)
        assert decode_sms(encode_sms_scenario(scn, reg), reg) == scn


# -- page routing ----------------------------------------------------------------------

def test_auth_page_and_login(core):
    lines = core.handle_line("auth.aspx?code=24680", START)
    assert lines[0] == "OK" and len(lines) == 3
    magic = decrypt_magic("sekrit", lines[1], lines[2])
    digest = derive_digest("s1", "admin", "123456")
    reply = core.handle_line(encode_request("login.aspx", [
        ("user", "admin"), ("auth", hash_credentials("admin", digest, magic))]), START)
    assert reply == ["OK", "admin", "300"]


def test_wrong_code_is_badcode(core):
    assert core.handle_line("auth.aspx?code=00000", START)[0] == "ERR BADCODE"


def test_pages_require_auth(core):
    assert core.handle_line("devices.aspx", START)[0] == "ERR MALFORMED_REQUEST"
    assert core.handle_line("devices.aspx?user=admin&auth=00", START)[0] == "ERR AUTH"


def test_unknown_page(core):
    assert _get(core, "nope.aspx")[0] == "ERR BADPAGE"


def test_camera_not_implemented(core):
    assert _get(core, "camera.aspx")[0] == "ERR NOT_IMPLEMENTED"


def test_status_page_filter_and_unknown_oid(core):
    lines = _get(core, "status.aspx", [("oid", "3")])
    assert lines == ["OK", "STAT|3|washer_off|Off"]
    assert _get(core, "status.aspx", [("oid", "88")])[0] == "ERR UNKNOWN_OID"


def test_map_page_carries_walls_icons_and_status(core):
    lines = _get(core, "map.aspx")
    kinds = {l.split("|")[0] for l in lines[1:]}
    assert kinds == {"WALL", "ICON", "STAT"}


def test_scenario_add_list_activate(core):
    body = "Scenario name: Night\nA. Sprinkler 1: off @ 22:00\n"
    assert core.handle(RequestEnvelope("scenario.aspx", _login_params(core) + [
        ("action", "add"), ("body", body)]), START) == ["OK", "Night"]
    lines = _get(core, "scenario.aspx", [("action", "list")])
    assert any(l.startswith("SCN|Night|1|") for l in lines)
    reply = _get(core, "scenario.aspx", [("action", "activate"), ("name", "Night")])
    assert reply[0] == "OK" and reply[1].startswith("TICKET|")


def test_scenario_add_upserts_case_insensitive(core):
    body = "Scenario name: gather dishes\nA. Sprinkler 1: on @ Now\n"
    assert core.handle(RequestEnvelope("scenario.aspx", _login_params(core) + [
        ("action", "add"), ("body", body)]), START)[0] == "OK"
    names = [l.split("|")[1] for l in
             _get(core, "scenario.aspx", [("action", "list")])[1:]]
    assert "Gather%20Dishes" not in names
    assert "gather%20dishes" in names


def test_scenario_add_validation_failure_lists_violations(core):
    body = "Scenario name: Bad\nA. Toaster: on @ Now\nB. Sprinkler 1: go @ Now\n"
    lines = core.handle(RequestEnvelope("scenario.aspx", _login_params(core) + [
        ("action", "add"), ("body", body)]), START)
    assert lines[0] == "ERR VALIDATION"
    codes = {l.split("|")[1] for l in lines[1:]}
    assert codes == {"UNKNOWN_ACTOR", "UNKNOWN_CAPABILITY"}


def test_scenario_parse_error_reported_as_violation(core):
    lines = core.handle(RequestEnvelope("scenario.aspx", _login_params(core) + [
        ("action", "add"), ("body", "no header at all")]), START)
    assert lines[0] == "ERR VALIDATION"
    assert lines[1].startswith("VIOL|PARSE_ERROR|")


def test_scenario_activate_disabled(core):
    _get(core, "scenario.aspx", [("action", "disable"), ("name", "Gather Dishes")])
    reply = _get(core, "scenario.aspx", [("action", "activate"),
                                         ("name", "Gather Dishes")])
    assert reply[0] == "ERR SCENARIO_DISABLED"


def test_rule_add_list_enable_disable(core):
    reply = _get(core, "rule.aspx", [
        ("action", "add"), ("name", "heat guard"),
        ("body", "when Temperature > 30 then Sprinkler 1: on @ Now")])
    assert reply == ["OK", "heat guard"]
    lines = _get(core, "rule.aspx", [("action", "list")])
    assert any(l.startswith("RULE|heat%20guard|1|") for l in lines)
    assert _get(core, "rule.aspx", [("action", "disable"), ("name", "heat guard")]) == ["OK"]
    assert core.reg.rules["heat guard"].enabled is False
    assert _get(core, "rule.aspx", [("action", "enable"), ("name", "x")])[0] == "ERR UNKNOWN_RULE"


def test_robots_page_enable_disable(core):
    lines = _get(core, "robots.aspx")
    assert sum(1 for l in lines if l.startswith("ROB|")) == 3
    assert sum(1 for l in lines if l.startswith("RSTAT|")) == 3
    assert _get(core, "robots.aspx", [("action", "disable"), ("rid", "3")]) == ["OK"]
    assert core.reg.robots[3].enabled is False
    assert _get(core, "robots.aspx", [("action", "disable"), ("rid", "3"),
                                      ("verb", "PickUp")]) == ["OK"]
    assert core.reg.robots[3].action_enabled["PickUp"] is False
    assert _get(core, "robots.aspx", [("action", "enable"), ("rid", "9")])[0] == "ERR UNKNOWN_RID"
    assert _get(core, "robots.aspx", [("action", "enable"), ("rid", "3"),
                                      ("verb", "Fly")])[0] == "ERR UNKNOWN_ACTION"


def test_handle_sms_stores_scenario(core):
    reply = core.handle_sms("+15550100", "SC|Quick|D1:on@N", START)
    assert reply == ["OK", "Quick"]
    assert "Quick" in core.reg.scenarios


def test_handle_sms_sender_allowlist(core):
    reply = core.handle_sms("+19998887777", "SC|Quick|D1:on@N", START)
    assert reply[0] == "ERR SMS_SENDER_REJECTED"


def test_handle_sms_length_and_charset(core):
    reply = core.handle_sms("+15550100", "SC|X|" + "D1:on@N;" * 40, START)
    assert reply[0] == "ERR SMS_TOO_LONG"
    reply = core.handle_sms("+15550100", "SC|café|D1:on@N", START)
    assert reply[0] == "ERR VALIDATION"


def test_handle_sms_validates_structure(core):
    reply = core.handle_sms("+15550100", "SC|X|D77:on@N", START)
    assert reply[0] == "ERR VALIDATION"


# -- transport equivalence ----------------------------------------------------------

def test_sms_and_query_submissions_store_equal_asts(home):
    rnd = random.Random(0x7EA)
    core_a = _core(home)
    from smarthome.fleet import load_fleet
    from tests.conftest import DEMO_HOME
    core_b = _core(load_fleet(DEMO_HOME))
    for n in range(200):
        scn = _random_small_scenario(rnd, core_a.reg, n)
        sms_reply = core_a.handle_sms("+15550100",
                                      encode_sms_scenario(scn, core_a.reg), START)
        assert sms_reply[0] == "OK"
        from smarthome.scenario import print_scenario
        query_reply = core_b.handle(RequestEnvelope("scenario.aspx",
                                                    _login_params(core_b) + [
            ("action", "add"), ("body", print_scenario(scn))]), START)
        assert query_reply[0] == "OK"
        assert core_a.reg.scenarios[scn.name] == core_b.reg.scenarios[scn.name]
