"""Core domain types and the device/robot registry.

The registry is the single source of truth shared by the scheduler, the
rules engine and the wire layer: devices, robots, scenarios, rules, user
credentials, allowed phone numbers and the home map.  Mutations are
serialized through one owner (the server loop); readers get value copies
via :func:`Registry.snapshot`.
"""

from __future__ import annotations

import copy
from collections import deque
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import TYPE_CHECKING

from .errors import HomeError

if TYPE_CHECKING:  # pragma: no cover
    from .rules import RuleDef
    from .scenario import Scenario

EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)

JOURNAL_LIMIT = 1000


def trunc(at: datetime) -> datetime:
    """Clamp an instant to whole seconds (the runtime clock resolution)."""
    if at.tzinfo is None:
        at = at.replace(tzinfo=timezone.utc)
    return at.replace(microsecond=0)


def format_instant(at: datetime) -> str:
    return trunc(at).isoformat()


def parse_instant(text: str) -> datetime:
    return trunc(datetime.fromisoformat(text))


class Kind(Enum):
    ACTUATOR = "actuator"
    SENSOR = "sensor"
    ACTUATOR_SENSOR = "actuator_sensor"


class Category(Enum):
    ON_OFF = "on_off"
    LEVELED = "leveled"
    APPEARING_DISAPPEARING = "appearing_disappearing"
    OPENED_CLOSED = "opened_closed"
    CUSTOM = "custom"


class Tier(Enum):
    VITAL = "vital"
    SECURITY = "security"
    AMBIENT = "ambient"


@dataclass(frozen=True)
class Status:
    """Tagged status value.

    ``kind`` is one of ``binary``, ``level``, ``presence``, ``aperture``,
    ``text`` or ``busy``; ``busy`` carries the label of the job the device
    is currently performing (e.g. "closing the door") and is accepted for
    any category as a transient state.
    """

    kind: str
    value: bool | int | str

    @classmethod
    def binary(cls, on: bool) -> "Status":
        return cls("binary", bool(on))

    @classmethod
    def level(cls, value: int) -> "Status":
        return cls("level", int(value))

    @classmethod
    def presence(cls, present: bool) -> "Status":
        return cls("presence", bool(present))

    @classmethod
    def aperture(cls, open_: bool) -> "Status":
        return cls("aperture", bool(open_))

    @classmethod
    def text(cls, label: str) -> "Status":
        return cls("text", label)

    @classmethod
    def busy(cls, job: str) -> "Status":
        return cls("busy", job)

    def label(self) -> str:
        """Human-readable status label as shown in STAT lines and the CLI."""
        if self.kind == "binary":
            return "On" if self.value else "Off"
        if self.kind == "presence":
            return "Present" if self.value else "Absent"
        if self.kind == "aperture":
            return "Opened" if self.value else "Closed"
        if self.kind == "level":
            return str(self.value)
        if self.kind == "busy":
            return f"Busy: {self.value}"
        return str(self.value)


# Steady-state status kind expected for each category.  Busy is permitted
# on every category (a device may always report an in-progress job).
_CATEGORY_KIND = {
    Category.ON_OFF: "binary",
    Category.LEVELED: "level",
    Category.APPEARING_DISAPPEARING: "presence",
    Category.OPENED_CLOSED: "aperture",
    Category.CUSTOM: "text",
}

CATEGORY_LABELS = {
    Category.ON_OFF: ("On", "Off"),
    Category.APPEARING_DISAPPEARING: ("Present", "Absent"),
    Category.OPENED_CLOSED: ("Opened", "Closed"),
}


def status_fits(category: Category, status: Status) -> bool:
    if status.kind == "busy":
        return True
    return _CATEGORY_KIND[category] == status.kind


def default_status(category: Category) -> Status:
    if category is Category.ON_OFF:
        return Status.binary(False)
    if category is Category.LEVELED:
        return Status.level(0)
    if category is Category.APPEARING_DISAPPEARING:
        return Status.presence(False)
    if category is Category.OPENED_CLOSED:
        return Status.aperture(False)
    return Status.text("")


@dataclass(frozen=True)
class ParamDomain:
    """What kind of parameter a verb takes.

    ``none`` rejects any parameter; every other domain requires one.
    ``int`` additionally bounds the value to [lo, hi].
    """

    kind: str  # none | location | object | int | text
    lo: int | None = None
    hi: int | None = None

    NONE = None  # type: ParamDomain
    LOCATION = None  # type: ParamDomain
    OBJECT = None  # type: ParamDomain
    TEXT = None  # type: ParamDomain

    @classmethod
    def integer(cls, lo: int, hi: int) -> "ParamDomain":
        return cls("int", lo, hi)

    def accepts(self, param: str | None) -> bool:
        if self.kind == "none":
            return param is None
        if param is None or param == "":
            return False
        if self.kind == "int":
            try:
                value = int(param)
            except ValueError:
                return False
            return (self.lo is None or value >= self.lo) and (
                self.hi is None or value <= self.hi
            )
        return True

    def describe(self) -> str:
        if self.kind == "int":
            return f"int:{self.lo}:{self.hi}"
        return self.kind


ParamDomain.NONE = ParamDomain("none")
ParamDomain.LOCATION = ParamDomain("location")
ParamDomain.OBJECT = ParamDomain("object")
ParamDomain.TEXT = ParamDomain("text")

_DOMAIN_NAMES = {
    "none": ParamDomain.NONE,
    "location": ParamDomain.LOCATION,
    "object": ParamDomain.OBJECT,
    "text": ParamDomain.TEXT,
}


def domain_from_json(obj) -> ParamDomain:
    if isinstance(obj, str):
        if obj not in _DOMAIN_NAMES:
            raise HomeError("INVALID_RECORD", f"unknown param domain {obj!r}")
        return _DOMAIN_NAMES[obj]
    if obj.get("kind") == "int":
        return ParamDomain.integer(obj["lo"], obj["hi"])
    return domain_from_json(obj["kind"])


def domain_to_json(dom: ParamDomain):
    if dom.kind == "int":
        return {"kind": "int", "lo": dom.lo, "hi": dom.hi}
    return dom.kind


@dataclass
class DeviceRecord:
    """One registered device.

    ``verbs`` maps each accepted verb to its parameter domain; pure
    sensors accept no verbs.  ``room``, ``icon`` and ``level_range`` are
    presentation/config extras used by the fleet and the map layer.
    """

    oid: int
    name: str
    kind: Kind
    category: Category
    verbs: dict[str, ParamDomain] = field(default_factory=dict)
    status: Status | None = None
    tier: Tier = Tier.AMBIENT
    last_updated: datetime = EPOCH
    room: str = ""
    icon: str = ""
    level_range: tuple[int, int] = (0, 100)

    def __post_init__(self):
        if self.status is None:
            self.status = default_status(self.category)

    def check(self) -> None:
        """Raise INVALID_RECORD on the first violated invariant."""
        if self.oid < 1:
            raise HomeError("INVALID_RECORD", "oid 0 is reserved for map furniture")
        if not self.name:
            raise HomeError("INVALID_RECORD", "device name must be non-empty")
        if self.kind is Kind.SENSOR and self.verbs:
            raise HomeError("INVALID_RECORD", "a pure sensor accepts no verbs")
        if self.kind is not Kind.SENSOR and not self.verbs:
            raise HomeError("INVALID_RECORD", f"{self.kind.value} needs at least one verb")
        if not status_fits(self.category, self.status):
            raise HomeError(
                "INVALID_RECORD",
                f"status kind {self.status.kind!r} does not fit category {self.category.value}",
            )
        lo, hi = self.level_range
        if lo > hi:
            raise HomeError("INVALID_RECORD", "level_range lo > hi")


@dataclass
class RobotRecord:
    """One registered robot.

    ``self_actions`` are verbs the robot performs itself; ``delegations``
    are (device oid, verb) pairs it may perform on devices.  A disabled
    robot, or a verb switched off in ``action_enabled``, fails capability
    validation.
    """

    rid: int
    name: str
    self_actions: dict[str, ParamDomain] = field(default_factory=dict)
    delegations: set[tuple[int, str]] = field(default_factory=set)
    enabled: bool = True
    action_enabled: dict[str, bool] = field(default_factory=dict)
    home: str = ""

    def check(self) -> None:
        if self.rid < 1:
            raise HomeError("INVALID_RECORD", "rid must be >= 1")
        if not self.name:
            raise HomeError("INVALID_RECORD", "robot name must be non-empty")

    def action_is_enabled(self, verb: str) -> bool:
        return self.enabled and self.action_enabled.get(verb, True)


@dataclass
class MapPolyline:
    """An open polygon of wall segments with a line width and RGB color."""

    width: int
    rgb: tuple[int, int, int]
    vertices: list[tuple[int, int]]

    def check(self) -> None:
        if self.width < 1:
            raise HomeError("MALFORMED_MAP", "line width must be >= 1")
        if any(c < 0 or c > 255 for c in self.rgb):
            raise HomeError("MALFORMED_MAP", "RGB component outside 0-255")
        if len(self.vertices) < 2:
            raise HomeError("MALFORMED_MAP", "a polyline needs at least 2 vertices")


@dataclass
class MapIcon:
    """Home top-view icon record: OID, display name, position, icon id.

    oid 0 marks non-controllable furniture; for oid != 0 the served
    icon id is recomputed from the device's live status.
    """

    oid: int
    name: str
    pos: tuple[int, int]
    icon_id: str


@dataclass
class UserCred:
    """Stored credential: a one-way digest, never the password itself."""

    username: str
    digest: str


class Registry:
    """The shared database: devices, robots, scenarios, rules, users, map."""

    def __init__(self):
        self.devices: dict[int, DeviceRecord] = {}
        self.robots: dict[int, RobotRecord] = {}
        self.scenarios: dict[str, "Scenario"] = {}
        self.rules: dict[str, "RuleDef"] = {}
        self.users: dict[str, UserCred] = {}
        self.allowed_phones: set[str] = set()
        self.map_walls: list[MapPolyline] = []
        self.map_icons: list[MapIcon] = []
        self.journals: dict[int, deque] = {}

    # -- devices / robots -------------------------------------------------

    def register_device(self, rec: DeviceRecord) -> None:
        rec.check()
        if rec.oid in self.devices:
            raise HomeError("DUPLICATE_OID", f"oid {rec.oid} already registered")
        self.devices[rec.oid] = rec
        self.journals[rec.oid] = deque(maxlen=JOURNAL_LIMIT)

    def register_robot(self, rec: RobotRecord) -> None:
        rec.check()
        if rec.rid in self.robots:
            raise HomeError("DUPLICATE_RID", f"rid {rec.rid} already registered")
        for oid, verb in rec.delegations:
            if oid not in self.devices:
                raise HomeError(
                    "UNKNOWN_DELEGATION_DEVICE",
                    f"delegation ({oid}, {verb}) references an unknown device",
                )
        self.robots[rec.rid] = rec

    def set_status(self, oid: int, status: Status, at: datetime, actor: str = "device") -> None:
        rec = self.devices.get(oid)
        if rec is None:
            raise HomeError("UNKNOWN_OID", f"no device with oid {oid}")
        if not status_fits(rec.category, status):
            raise HomeError(
                "SHAPE_MISMATCH",
                f"status kind {status.kind!r} does not fit category {rec.category.value}",
            )
        rec.status = status
        rec.last_updated = trunc(at)
        self.journals[oid].append((trunc(at), status, actor))

    def snapshot(self, tier_filter: Tier | None = None) -> list[DeviceRecord]:
        """Value copies of matching device records, ascending by oid."""
        records = [
            r for r in self.devices.values() if tier_filter is None or r.tier == tier_filter
        ]
        return [copy.deepcopy(r) for r in sorted(records, key=lambda r: r.oid)]

    def journal(self, oid: int) -> list[tuple[datetime, Status, str]]:
        if oid not in self.journals:
            raise HomeError("UNKNOWN_OID", f"no device with oid {oid}")
        return list(self.journals[oid])

    # -- lookups ----------------------------------------------------------

    def device_by_name(self, name: str) -> DeviceRecord | None:
        """Case-insensitive name lookup; duplicate names resolve to the lowest oid."""
        wanted = name.strip().lower()
        hits = [r for r in self.devices.values() if r.name.lower() == wanted]
        return min(hits, key=lambda r: r.oid) if hits else None

    def robot_by_name(self, name: str) -> RobotRecord | None:
        wanted = name.strip().lower()
        hits = [r for r in self.robots.values() if r.name.lower() == wanted]
        return min(hits, key=lambda r: r.rid) if hits else None

    def scenario_by_name(self, name: str) -> "Scenario | None":
        if name in self.scenarios:
            return self.scenarios[name]
        wanted = name.strip().lower()
        for key, scn in self.scenarios.items():
            if key.lower() == wanted:
                return scn
        return None

    # -- housekeeping -----------------------------------------------------

    def lint(self) -> list[str]:
        """Non-fatal warnings (e.g. duplicate device names)."""
        warnings = []
        seen: dict[str, int] = {}
        for rec in sorted(self.devices.values(), key=lambda r: r.oid):
            key = rec.name.lower()
            if key in seen:
                warnings.append(
                    f"duplicate device name {rec.name!r} (oids {seen[key]} and {rec.oid})"
                )
            else:
                seen[key] = rec.oid
        return warnings

    def check_integrity(self) -> list[str]:
        """Global referential-integrity violations (empty when consistent)."""
        from .scenario import refs_of

        problems = []
        for robot in self.robots.values():
            for oid, verb in sorted(robot.delegations):
                if oid not in self.devices:
                    problems.append(
                        f"robot {robot.name!r} delegates to unknown device oid {oid}"
                    )
        for icon in self.map_icons:
            if icon.oid != 0 and icon.oid not in self.devices:
                problems.append(f"map icon {icon.name!r} references unknown oid {icon.oid}")
        for scn in self.scenarios.values():
            for ref in refs_of(scn):
                if self.scenario_by_name(ref.name) is None:
                    problems.append(
                        f"scenario {scn.name!r} references unknown scenario {ref.name!r}"
                    )
        for rule in self.rules.values():
            for atom in rule.condition.atoms():
                if atom.oid not in self.devices:
                    problems.append(
                        f"rule {rule.name!r} references unknown sensor oid {atom.oid}"
                    )
        return problems
