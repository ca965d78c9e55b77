"""The client/server wire protocol: codecs, auth, and page handlers.

Requests are single lines, `<page>?<key>=<value>&...`, values
percent-encoded; responses are short lists of LF-separated lines whose
first line is `OK` or `ERR <code>`.  A second, far more constrained
transport accepts 160-character SMS bodies carrying whole scenarios in
a compact grammar.

Authentication is a challenge-response handshake: the client presents
an installation code, the server answers with a nonce and an encrypted
one-time magic number, and every later request carries a credential
digest salted with that magic.  The construction (hash-derived XOR
keystream, salted digests) keeps casual eavesdroppers and replaying
neighbours out of a hobby deployment; it is not production
cryptography and the docs say so.
"""

from __future__ import annotations

import re
import secrets
from dataclasses import dataclass, field
from datetime import datetime
from hashlib import sha256
from urllib.parse import quote, unquote

from .errors import HomeError, ParseError
from .model import Category, DeviceRecord, MapIcon, MapPolyline, Registry, UserCred, trunc
from .rules import parse_rule, print_rule
from .scenario import (
    Action,
    Actor,
    Scenario,
    ScenarioRef,
    TimeSpec,
    manage,
    parse_scenario,
    print_scenario,
    validate,
)

SMS_LIMIT = 160

# Violations that reject a submitted scenario/rule or an activation.
# Enablement violations (ROBOT_DISABLED, ACTION_DISABLED) pass: they
# describe a temporary state, re-checked when commands dispatch.
BLOCKING_VIOLATIONS = {"UNKNOWN_ACTOR", "UNKNOWN_CAPABILITY", "UNKNOWN_SCENARIO",
                       "PARAM_MISMATCH", "CYCLE"}

_BAD_ESCAPE = re.compile(r"%(?![0-9A-Fa-f]{2})")


# ---------------------------------------------------------------------------
# percent-encoding

def encode_component(text: str) -> str:
    return quote(text, safe="")


def decode_component(text: str, what: str = "value") -> str:
    if _BAD_ESCAPE.search(text):
        raise HomeError("MALFORMED_REQUEST", f"bad percent-escape in {what}: {text!r}")
    return unquote(text)


# ---------------------------------------------------------------------------
# request envelope

@dataclass
class RequestEnvelope:
    page: str
    params: list[tuple[str, str]] = field(default_factory=list)

    def get(self, key: str) -> str | None:
        for k, v in self.params:
            if k == key:
                return v
        return None

    def require(self, key: str) -> str:
        value = self.get(key)
        if value is None:
            raise HomeError("MALFORMED_REQUEST", f"missing parameter {key!r}")
        return value


def encode_request(page: str, params) -> str:
    pairs = list(params)
    if not pairs:
        return page
    query = "&".join(f"{encode_component(k)}={encode_component(v)}" for k, v in pairs)
    return f"{page}?{query}"


def decode_request(line: str) -> RequestEnvelope:
    line = line.strip()
    page, _, query = line.partition("?")
    if not page:
        raise HomeError("MALFORMED_REQUEST", "empty page name")
    params: list[tuple[str, str]] = []
    seen: set[str] = set()
    for segment in query.split("&"):
        if not segment:  # tolerate '&&' and trailing '&'
            continue
        raw_key, _, raw_value = segment.partition("=")
        key = decode_component(raw_key, "key")
        if not key:
            raise HomeError("MALFORMED_REQUEST", f"empty key in {segment!r}")
        if key in seen:
            raise HomeError("MALFORMED_REQUEST", f"duplicate key {key!r}")
        seen.add(key)
        params.append((key, decode_component(raw_value)))
    return RequestEnvelope(page, params)


# ---------------------------------------------------------------------------
# challenge-response auth

@dataclass
class Session:
    magic: str
    issued_at: datetime
    user: str | None = None


class SessionTable:
    def __init__(self, ttl: int = 300):
        self.ttl = ttl
        self.sessions: dict[str, Session] = {}

    def is_expired(self, session: Session, at: datetime) -> bool:
        return (at - session.issued_at).total_seconds() > self.ttl

    def issue(self, at: datetime) -> Session:
        at = trunc(at)
        for magic in [m for m, s in self.sessions.items() if self.is_expired(s, at)]:
            del self.sessions[magic]
        session = Session(secrets.token_hex(16), at)
        self.sessions[session.magic] = session
        return session


def keystream(secret: str, nonce: bytes, length: int) -> bytes:
    block = sha256(secret.encode() + nonce).digest()[:16]
    return (block * (length // len(block) + 1))[:length]


def encrypt_magic(secret: str, nonce: bytes, magic: str) -> str:
    raw = magic.encode("ascii")
    return bytes(a ^ b for a, b in zip(raw, keystream(secret, nonce, len(raw)))).hex()


def decrypt_magic(secret: str, nonce_hex: str, ciphertext_hex: str) -> str:
    raw = bytes.fromhex(ciphertext_hex)
    plain = bytes(a ^ b for a, b in zip(raw, keystream(secret, bytes.fromhex(nonce_hex), len(raw))))
    return plain.decode("ascii")


def issue_magic(code: str, at: datetime, special_code: str, secret: str,
                table: SessionTable) -> tuple[str, str]:
    """Handshake step: returns (nonce hex, encrypted magic hex)."""
    if code != special_code:
        raise HomeError("BADCODE", "unknown installation code")
    session = table.issue(at)
    nonce = secrets.token_bytes(16)
    return nonce.hex(), encrypt_magic(secret, nonce, session.magic)


def hash_credentials(user: str, password: str, magic: str) -> str:
    return sha256(f"{user}:{password}:{magic}".encode()).hexdigest()


def derive_digest(salt: str, user: str, password: str) -> str:
    """Stored credential: the server never keeps the password itself."""
    return sha256(f"{salt}:{user}:{password}".encode()).hexdigest()


def authenticate(env: RequestEnvelope, users, table: SessionTable,
                 at: datetime) -> tuple[str, Session]:
    """Match the request's credential digest against a live session.

    The digest is hash_credentials(user, stored digest, session magic),
    so a fresh magic invalidates every previously computed digest.
    """
    user = env.require("user")
    auth = env.require("auth")
    cred = users.get(user)
    expired_match = False
    if cred is not None:
        for session in table.sessions.values():
            if hash_credentials(user, cred.digest, session.magic) != auth:
                continue
            if table.is_expired(session, at):
                expired_match = True
                continue
            session.user = user
            return user, session
    if expired_match:
        raise HomeError("EXPIRED", "magic number expired, handshake again")
    raise HomeError("AUTH", "credentials match no live session")


# ---------------------------------------------------------------------------
# map codec

_CATEGORY_ICON = {
    Category.ON_OFF: "onoff",
    Category.LEVELED: "level",
    Category.APPEARING_DISAPPEARING: "presence",
    Category.OPENED_CLOSED: "aperture",
    Category.CUSTOM: "custom",
}


def icon_for(rec: DeviceRecord) -> str:
    """Icon id carrying both device type and current status."""
    base = rec.icon or _CATEGORY_ICON[rec.category]
    status = rec.status
    if status.kind == "busy":
        return f"{base}_busy"
    if status.kind == "binary":
        return f"{base}_on" if status.value else f"{base}_off"
    if status.kind == "aperture":
        return f"{base}_open" if status.value else f"{base}_closed"
    if status.kind == "presence":
        return f"{base}_in" if status.value else f"{base}_out"
    if status.kind == "level":
        lo, hi = rec.level_range
        bucket = min(9, max(0, (status.value - lo) * 10 // (hi - lo + 1)))
        return f"{base}_{bucket}"
    return base


def encode_map(walls, icons, devices: dict[int, DeviceRecord] | None = None) -> list[str]:
    """WALL/ICON lines; live devices refresh each icon's status id."""
    lines = []
    for wall in walls:
        width, (r, g, b) = wall.width, wall.rgb
        points = [(width, r), (g, b)] + [tuple(v) for v in wall.vertices]
        lines.append("WALL|" + ";".join(f"{x},{y}" for x, y in points))
    for icon in icons:
        icon_id = icon.icon_id
        if devices is not None and icon.oid != 0 and icon.oid in devices:
            icon_id = icon_for(devices[icon.oid])
        x, y = icon.pos
        lines.append(f"ICON|{icon.oid}|{encode_component(icon.name)}|{x},{y}|{icon_id}")
    return lines


def _int_pair(text: str, context: str) -> tuple[int, int]:
    x, sep, y = text.partition(",")
    try:
        if not sep:
            raise ValueError
        return int(x), int(y)
    except ValueError:
        raise HomeError("MALFORMED_MAP", f"bad point {text!r} in {context}") from None


def decode_map(lines) -> tuple[list[MapPolyline], list[MapIcon]]:
    """Inverse of encode_map; lines other than WALL/ICON are ignored."""
    walls, icons = [], []
    for line in lines:
        if line.startswith("WALL|"):
            points = [_int_pair(p, "WALL") for p in line[5:].split(";")]
            if len(points) < 4:
                raise HomeError("MALFORMED_MAP", f"WALL needs >= 4 points, got {len(points)}")
            (width, r), (g, b) = points[0], points[1]
            wall = MapPolyline(width, (r, g, b), [tuple(p) for p in points[2:]])
            wall.check()
            walls.append(wall)
        elif line.startswith("ICON|"):
            parts = line.split("|")
            if len(parts) != 5:
                raise HomeError("MALFORMED_MAP", f"ICON needs 5 fields, got {len(parts)}")
            try:
                oid = int(parts[1])
            except ValueError:
                raise HomeError("MALFORMED_MAP", f"bad oid {parts[1]!r}") from None
            if oid < 0:
                raise HomeError("MALFORMED_MAP", f"negative oid {oid}")
            icons.append(MapIcon(
                oid, decode_component(parts[2], "icon name"),
                _int_pair(parts[3], "ICON"), parts[4],
            ))
    return walls, icons


def domain_from_wire(text: str):
    from .model import ParamDomain, domain_from_json

    if text.startswith("int:"):
        _, lo, hi = text.split(":")
        return ParamDomain.integer(int(lo), int(hi))
    return domain_from_json(text)


def _parse_verb_list(text: str) -> tuple[dict, dict]:
    verbs, enabled = {}, {}
    for part in [p for p in text.split(";") if p]:
        if part.endswith("!"):
            part = part[:-1]
            disabled = True
        else:
            disabled = False
        verb, _, domain = part.partition("(")
        verbs[verb] = domain_from_wire(domain.rstrip(")"))
        if disabled:
            enabled[verb] = False
    return verbs, enabled


def decode_devices(lines) -> Registry:
    """Rebuild a registry view from devices.aspx DEV/ROB payload lines.

    Clients use this to resolve names to ids (SMS encoding, validation
    hints) without a second schema.
    """
    from .model import Category, Kind, RobotRecord, Tier

    reg = Registry()
    robots = []
    for line in lines:
        if line.startswith("DEV|"):
            parts = line.split("|")
            if len(parts) != 8:
                raise HomeError("MALFORMED_REQUEST", f"bad DEV line: {line!r}")
            verbs, _ = _parse_verb_list(parts[6])
            reg.register_device(DeviceRecord(
                oid=int(parts[1]),
                name=decode_component(parts[2], "device name"),
                kind=Kind(parts[3]),
                category=Category(parts[4]),
                verbs=verbs,
                tier=Tier(parts[5]),
                room=decode_component(parts[7], "room"),
            ))
        elif line.startswith("ROB|"):
            robots.append(line.split("|"))
    for parts in robots:  # after devices: delegations must resolve
        if len(parts) != 6:
            raise HomeError("MALFORMED_REQUEST", f"bad ROB line: {'|'.join(parts)!r}")
        self_actions, action_enabled = _parse_verb_list(parts[4])
        delegations = set()
        for pair in [p for p in parts[5].split(";") if p]:
            if pair.endswith("!"):
                pair = pair[:-1]
                disabled = True
            else:
                disabled = False
            oid, _, verb = pair.partition(":")
            delegations.add((int(oid), verb))
            if disabled:
                action_enabled[verb] = False
        rec = RobotRecord(
            rid=int(parts[1]),
            name=decode_component(parts[2], "robot name"),
            self_actions=self_actions,
            delegations=delegations,
            enabled=parts[3] == "1",
            action_enabled=action_enabled,
        )
        reg.register_robot(rec)
    return reg


# ---------------------------------------------------------------------------
# SMS codec

def _sms_quote(text: str) -> str:
    return quote(text, safe=" ")


def _sms_time(spec: TimeSpec) -> str:
    if spec.kind == "now":
        return "N"
    if spec.kind == "after":
        return f"+{spec.minutes}"
    return f"{spec.hour:02d}{spec.minute:02d}"


def _sms_time_parse(text: str) -> TimeSpec:
    if text == "N":
        return TimeSpec.now()
    if text.startswith("+"):
        if not text[1:].isdigit() or int(text[1:]) < 1:
            raise ParseError(f"bad relative time {text!r}")
        return TimeSpec.after(int(text[1:]))
    if len(text) == 4 and text.isdigit():
        hour, minute = int(text[:2]), int(text[2:])
        if hour > 23 or minute > 59:
            raise ParseError(f"bad clock time {text!r}")
        return TimeSpec.at(hour, minute)
    raise ParseError(f"expected N, HHMM or +<minutes>, got {text!r}")


def _sms_actor(actor: Actor, reg: Registry) -> str:
    def did(name: str) -> int:
        rec = reg.device_by_name(name)
        if rec is None:
            raise HomeError("UNKNOWN_ACTOR", f"no device named {name!r}")
        return rec.oid

    def rid(name: str) -> int:
        rec = reg.robot_by_name(name)
        if rec is None:
            raise HomeError("UNKNOWN_ACTOR", f"no robot named {name!r}")
        return rec.rid

    if actor.kind == "device":
        return f"D{did(actor.device)}"
    if actor.kind == "robot":
        return f"R{rid(actor.robot)}"
    return f"R{rid(actor.robot)}>D{did(actor.device)}"


def encode_sms_scenario(s: Scenario, reg: Registry) -> str:
    """Compact one-line body; raises SMS_TOO_LONG past the 160-char limit."""
    parts = []
    for task in s.tasks:
        if isinstance(task, ScenarioRef):
            text = f"[{_sms_quote(task.name)}]"
            if task.override_time is not None:
                text += f"@{_sms_time(task.override_time)}"
        else:
            text = f"{_sms_actor(task.actor, reg)}:{_sms_quote(task.verb)}"
            if task.param is not None:
                text += f"({_sms_quote(task.param)})"
            text += f"@{_sms_time(task.time)}"
        parts.append(text)
    body = f"SC|{_sms_quote(s.name)}|{';'.join(parts)}"
    if len(body) > SMS_LIMIT:
        raise HomeError("SMS_TOO_LONG", f"body is {len(body)} chars, limit {SMS_LIMIT}")
    return body


_SMS_ACTION = re.compile(
    r"^(?P<actor>R\d+>D\d+|R\d+|D\d+):(?P<verb>[^(@]+)"
    r"(?:\((?P<param>[^)]*)\))?@(?P<time>.+)$"
)
_SMS_REF = re.compile(r"^\[(?P<name>[^\]]+)\](?:@(?P<time>.+))?$")


def decode_sms(body: str, reg: Registry) -> Scenario:
    parts = body.split("|")
    if len(parts) != 3 or parts[0] != "SC":
        raise ParseError("expected 'SC|<name>|<task>;...'")
    name = decode_component(parts[1], "scenario name")
    if not name:
        raise ParseError("empty scenario name")

    def device_name(oid: int) -> str:
        rec = reg.devices.get(oid)
        if rec is None:
            raise ParseError(f"unknown device oid {oid}")
        return rec.name

    def robot_name(rid: int) -> str:
        rec = reg.robots.get(rid)
        if rec is None:
            raise ParseError(f"unknown robot rid {rid}")
        return rec.name

    tasks = []
    for segment in parts[2].split(";"):
        m = _SMS_REF.match(segment)
        if m:
            override = _sms_time_parse(m.group("time")) if m.group("time") else None
            tasks.append(ScenarioRef(decode_component(m.group("name"), "reference"), override))
            continue
        m = _SMS_ACTION.match(segment)
        if not m:
            raise ParseError(f"bad task {segment!r}")
        code = m.group("actor")
        if ">" in code:
            r, d = code.split(">")
            actor = Actor.robot_on_device(robot_name(int(r[1:])), device_name(int(d[1:])))
        elif code.startswith("R"):
            actor = Actor.robot_self(robot_name(int(code[1:])))
        else:
            actor = Actor.for_device(device_name(int(code[1:])))
        param = m.group("param")
        tasks.append(Action(
            actor,
            decode_component(m.group("verb"), "verb"),
            decode_component(param, "param") if param is not None else None,
            _sms_time_parse(m.group("time")),
        ))
    if not tasks:
        raise ParseError("a scenario needs at least one task")
    return Scenario(name, tuple(tasks))


# ---------------------------------------------------------------------------
# server configuration

@dataclass
class ServerConfig:
    shared_secret: str = "home-lab-secret"
    special_code: str = "24680"
    ttl: int = 300
    credential_salt: str = "home-lab-salt"
    host: str = "127.0.0.1"
    port: int = 8031
    sms_port: int = 8032
    http_port: int = 8080
    allowed_phones: tuple[str, ...] = ()
    users: tuple[tuple[str, str], ...] = ()  # (username, password) seeded at startup
    poll_seconds: dict | None = None
    state_path: str = ""
    home: str = ""


def load_server_config(source) -> ServerConfig:
    if isinstance(source, str):
        import json

        with open(source, encoding="utf-8") as fh:
            source = json.load(fh)
    known = {f for f in ServerConfig.__dataclass_fields__}
    kwargs = {k: v for k, v in source.items() if k in known}
    if "allowed_phones" in kwargs:
        kwargs["allowed_phones"] = tuple(kwargs["allowed_phones"])
    if "users" in kwargs:
        kwargs["users"] = tuple(
            (u["username"], u["password"]) if isinstance(u, dict) else tuple(u)
            for u in kwargs["users"]
        )
    return ServerConfig(**kwargs)


# ---------------------------------------------------------------------------
# page handlers

class ServerCore:
    """Routes request envelopes to the registry, runtime and fleet.

    Single-threaded by contract: the network layer funnels requests to
    the one thread that owns the runtime loop.  ``persist`` (when set)
    is called after every structural mutation.
    """

    def __init__(self, reg: Registry, fleet, runtime, config: ServerConfig):
        self.reg = reg
        self.fleet = fleet
        self.runtime = runtime
        self.config = config
        self.sessions = SessionTable(config.ttl)
        self.persist = None
        for username, password in config.users:
            self.reg.users[username] = UserCred(
                username, derive_digest(config.credential_salt, username, password))

    # -- entry points -------------------------------------------------------

    def handle_line(self, line: str, at: datetime | None = None) -> list[str]:
        at = trunc(at) if at is not None else self.runtime.now
        try:
            return self.handle(decode_request(line), at)
        except HomeError as exc:
            return self._error_lines(exc)

    def handle(self, env: RequestEnvelope, at: datetime) -> list[str]:
        try:
            return self._route(env, at)
        except HomeError as exc:
            return self._error_lines(exc)

    def handle_sms(self, sender: str, body: str, at: datetime) -> list[str]:
        try:
            if any(ord(c) > 127 for c in body):
                raise ParseError("SMS body must be 7-bit text")
            if len(body) > SMS_LIMIT:
                raise HomeError("SMS_TOO_LONG", f"body is {len(body)} chars, limit {SMS_LIMIT}")
            if sender not in self.reg.allowed_phones:
                raise HomeError("SMS_SENDER_REJECTED", f"{sender} is not an allowed sender")
            scn = decode_sms(body, self.reg)
            self._store_scenario(scn)
            return ["OK", scn.name]
        except HomeError as exc:
            return self._error_lines(exc)

    def _error_lines(self, exc: HomeError) -> list[str]:
        if exc.code == "VALIDATION_FAILED":
            viols = getattr(exc, "violations", [])
            return ["ERR VALIDATION"] + [f"VIOL|{v.code}|{v.message}" for v in viols]
        if isinstance(exc, ParseError):
            return ["ERR VALIDATION", f"VIOL|PARSE_ERROR|{exc.detail}"]
        return [f"ERR {exc.code}"] + ([exc.detail] if exc.detail else [])

    # -- routing -------------------------------------------------------------

    def _route(self, env: RequestEnvelope, at: datetime) -> list[str]:
        page = env.page.lower()
        if page == "auth.aspx":
            nonce, ciphertext = issue_magic(
                env.require("code"), at, self.config.special_code,
                self.config.shared_secret, self.sessions)
            return ["OK", nonce, ciphertext]
        user, session = authenticate(env, self.reg.users, self.sessions, at)
        if page == "login.aspx":
            remaining = self.config.ttl - int((at - session.issued_at).total_seconds())
            return ["OK", user, str(remaining)]
        if page == "devices.aspx":
            return self._devices()
        if page == "status.aspx":
            return self._status(env)
        if page == "map.aspx":
            return ["OK"] + encode_map(
                self.reg.map_walls, self.reg.map_icons, self.reg.devices
            ) + self._stat_lines()
        if page == "scenario.aspx":
            return self._scenario(env, at)
        if page == "rule.aspx":
            return self._rule(env)
        if page == "robots.aspx":
            return self._robots(env)
        if page == "camera.aspx":
            raise HomeError("NOT_IMPLEMENTED", "camera streaming is not part of this build")
        raise HomeError("BADPAGE", f"unknown page {env.page!r}")

    # -- device / status pages -----------------------------------------------

    @staticmethod
    def _verb_list(verbs: dict, enabled=None) -> str:
        parts = []
        for verb in sorted(verbs):
            text = f"{verb}({verbs[verb].describe()})"
            if enabled is not None and not enabled.get(verb, True):
                text += "!"
            parts.append(text)
        return ";".join(parts)

    def _robot_lines(self) -> list[str]:
        lines = []
        for rec in sorted(self.reg.robots.values(), key=lambda r: r.rid):
            delegations = ";".join(
                f"{oid}:{verb}" + ("" if rec.action_enabled.get(verb, True) else "!")
                for oid, verb in sorted(rec.delegations)
            )
            lines.append(
                f"ROB|{rec.rid}|{encode_component(rec.name)}|{int(rec.enabled)}"
                f"|{self._verb_list(rec.self_actions, rec.action_enabled)}|{delegations}"
            )
        return lines

    def _devices(self) -> list[str]:
        lines = ["OK"]
        for rec in sorted(self.reg.devices.values(), key=lambda r: r.oid):
            lines.append(
                f"DEV|{rec.oid}|{encode_component(rec.name)}|{rec.kind.value}"
                f"|{rec.category.value}|{rec.tier.value}|{self._verb_list(rec.verbs)}"
                f"|{encode_component(rec.room)}"
            )
        return lines + self._robot_lines()

    def _stat_lines(self) -> list[str]:
        return [
            f"STAT|{rec.oid}|{icon_for(rec)}|{quote(rec.status.label(), safe=' :,().')}"
            for rec in sorted(self.reg.devices.values(), key=lambda r: r.oid)
        ]

    def _status(self, env: RequestEnvelope) -> list[str]:
        lines = self._stat_lines()
        oid = env.get("oid")
        if oid is not None:
            lines = [l for l in lines if l.split("|")[1] == oid]
            if not lines:
                raise HomeError("UNKNOWN_OID", f"no device with oid {oid}")
        return ["OK"] + lines

    # -- scenario / rule pages -------------------------------------------------

    def _check_blocking(self, wrapper: Scenario) -> None:
        blocking = [v for v in validate(wrapper, self.reg)
                    if v.code in BLOCKING_VIOLATIONS]
        if blocking:
            exc = HomeError("VALIDATION_FAILED", "; ".join(str(v) for v in blocking))
            exc.violations = blocking
            raise exc

    def _store_scenario(self, scn: Scenario) -> None:
        self._check_blocking(scn)
        existing = self.reg.scenario_by_name(scn.name)
        if existing is not None:
            for key, value in list(self.reg.scenarios.items()):
                if value is existing:
                    del self.reg.scenarios[key]
        self.reg.scenarios[scn.name] = scn
        self._mutated()

    def _scenario(self, env: RequestEnvelope, at: datetime) -> list[str]:
        action = env.require("action")
        if action == "list":
            lines = ["OK"]
            for name in sorted(self.reg.scenarios, key=str.lower):
                scn = self.reg.scenarios[name]
                lines.append(
                    f"SCN|{encode_component(scn.name)}|{int(scn.enabled)}"
                    f"|{encode_component(print_scenario(scn))}"
                )
            return lines
        if action == "add":
            scn = parse_scenario(env.require("body"), self.reg)
            self._store_scenario(scn)
            return ["OK", scn.name]
        if action in ("enable", "disable"):
            manage(self.reg, env.require("name"), action)
            self._mutated()
            return ["OK"]
        if action == "activate":
            result = self.runtime.activate_scenario(env.require("name"))
            return ["OK", f"TICKET|{result.ticket}|{result.scheduled}"]
        raise HomeError("MALFORMED_REQUEST", f"unknown scenario action {action!r}")

    def _rule(self, env: RequestEnvelope) -> list[str]:
        action = env.require("action")
        if action == "list":
            lines = ["OK"]
            for name in sorted(self.reg.rules, key=str.lower):
                rule = self.reg.rules[name]
                lines.append(
                    f"RULE|{encode_component(rule.name)}|{int(rule.enabled)}"
                    f"|{encode_component(print_rule(rule))}"
                )
            return lines
        if action == "add":
            name = env.require("name")
            if not name:
                raise HomeError("MALFORMED_REQUEST", "empty rule name")
            rule = parse_rule(env.require("body"), self.reg, name)
            self._check_blocking(Scenario(rule.name, rule.actions))
            self.reg.rules[name] = rule
            self._mutated()
            return ["OK", name]
        if action in ("enable", "disable"):
            name = env.require("name")
            rule = self.reg.rules.get(name)
            if rule is None:
                raise HomeError("UNKNOWN_RULE", f"no rule named {name!r}")
            rule.enabled = action == "enable"
            self._mutated()
            return ["OK"]
        raise HomeError("MALFORMED_REQUEST", f"unknown rule action {action!r}")

    def _robots(self, env: RequestEnvelope) -> list[str]:
        action = env.get("action") or "list"
        if action == "list":
            lines = ["OK"] + self._robot_lines()
            for state in self.fleet.robot_states():
                lines.append(
                    f"RSTAT|{state['rid']}|{encode_component(state['location'])}"
                    f"|{encode_component(state['state'])}|{state['queued']}"
                )
            return lines
        if action in ("enable", "disable"):
            rid = env.require("rid")
            rec = self.reg.robots.get(int(rid)) if rid.isdigit() else None
            if rec is None:
                raise HomeError("UNKNOWN_RID", f"no robot with rid {rid}")
            verb = env.get("verb")
            if verb is None:
                rec.enabled = action == "enable"
            else:
                canonical = next(
                    (v for v in rec.self_actions if v.lower() == verb.lower()),
                    next((v for _, v in rec.delegations if v.lower() == verb.lower()), None),
                )
                if canonical is None:
                    raise HomeError("UNKNOWN_ACTION", f"{rec.name!r} has no action {verb!r}")
                rec.action_enabled[canonical] = action == "enable"
            self._mutated()
            return ["OK"]
        raise HomeError("MALFORMED_REQUEST", f"unknown robots action {action!r}")

    def _mutated(self) -> None:
        if self.persist is not None:
            self.persist()
