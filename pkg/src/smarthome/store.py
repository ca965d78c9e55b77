"""Line-delimited JSON persistence for the registry.

One record per line, typed by its ``t`` field.  Lines with an unknown
``t`` and unknown fields inside known records are ignored, so files
written by newer builds still load.  Records may appear in any order;
loading resolves dependencies (robots after devices) itself.
"""

from __future__ import annotations

import json
import os
import tempfile

from .errors import HomeError
from .model import (
    Category,
    DeviceRecord,
    Kind,
    MapIcon,
    MapPolyline,
    Registry,
    RobotRecord,
    Status,
    Tier,
    UserCred,
    domain_from_json,
    domain_to_json,
    parse_instant,
)
from .rules import rule_from_json, rule_to_json
from .scenario import scenario_from_json, scenario_to_json


def status_to_json(status: Status) -> dict:
    return {"kind": status.kind, "value": status.value}


def status_from_json(obj: dict) -> Status:
    return Status(obj["kind"], obj["value"])


def device_to_json(rec: DeviceRecord) -> dict:
    return {
        "t": "device",
        "oid": rec.oid,
        "name": rec.name,
        "kind": rec.kind.value,
        "category": rec.category.value,
        "verbs": {v: domain_to_json(d) for v, d in sorted(rec.verbs.items())},
        "status": status_to_json(rec.status),
        "tier": rec.tier.value,
        "last_updated": rec.last_updated.isoformat(),
        "room": rec.room,
        "icon": rec.icon,
        "level_range": list(rec.level_range),
    }


def device_from_json(obj: dict) -> DeviceRecord:
    return DeviceRecord(
        oid=obj["oid"],
        name=obj["name"],
        kind=Kind(obj["kind"]),
        category=Category(obj["category"]),
        verbs={v: domain_from_json(d) for v, d in obj.get("verbs", {}).items()},
        status=status_from_json(obj["status"]) if "status" in obj else None,
        tier=Tier(obj.get("tier", Tier.AMBIENT.value)),
        last_updated=parse_instant(obj.get("last_updated", "1970-01-01T00:00:00+00:00")),
        room=obj.get("room", ""),
        icon=obj.get("icon", ""),
        level_range=tuple(obj.get("level_range", (0, 100))),
    )


def robot_to_json(rec: RobotRecord) -> dict:
    return {
        "t": "robot",
        "rid": rec.rid,
        "name": rec.name,
        "self_actions": {v: domain_to_json(d) for v, d in sorted(rec.self_actions.items())},
        "delegations": sorted([oid, verb] for oid, verb in rec.delegations),
        "enabled": rec.enabled,
        "action_enabled": dict(sorted(rec.action_enabled.items())),
        "home": rec.home,
    }


def robot_from_json(obj: dict) -> RobotRecord:
    return RobotRecord(
        rid=obj["rid"],
        name=obj["name"],
        self_actions={v: domain_from_json(d) for v, d in obj.get("self_actions", {}).items()},
        delegations={(oid, verb) for oid, verb in obj.get("delegations", [])},
        enabled=bool(obj.get("enabled", True)),
        action_enabled={k: bool(v) for k, v in obj.get("action_enabled", {}).items()},
        home=obj.get("home", ""),
    )


def _wall_to_json(wall: MapPolyline) -> dict:
    return {
        "t": "wall",
        "width": wall.width,
        "rgb": list(wall.rgb),
        "vertices": [list(v) for v in wall.vertices],
    }


def _icon_to_json(icon: MapIcon) -> dict:
    return {
        "t": "icon",
        "oid": icon.oid,
        "name": icon.name,
        "pos": list(icon.pos),
        "icon_id": icon.icon_id,
    }


def dump_lines(reg: Registry) -> list[str]:
    records = []
    records += [device_to_json(r) for r in sorted(reg.devices.values(), key=lambda r: r.oid)]
    records += [robot_to_json(r) for r in sorted(reg.robots.values(), key=lambda r: r.rid)]
    records += [
        {"t": "user", "username": u.username, "digest": u.digest}
        for u in sorted(reg.users.values(), key=lambda u: u.username)
    ]
    records += [{"t": "phone", "number": n} for n in sorted(reg.allowed_phones)]
    records += [_wall_to_json(w) for w in reg.map_walls]
    records += [_icon_to_json(i) for i in reg.map_icons]
    records += [dict(scenario_to_json(s), t="scenario") for s in reg.scenarios.values()]
    records += [dict(rule_to_json(r), t="rule") for r in reg.rules.values()]
    return [json.dumps(rec, sort_keys=True, separators=(",", ":")) for rec in records]


def save_registry(reg: Registry, path: str) -> None:
    """Atomic rewrite: temp file in the same directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".registry-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            for line in dump_lines(reg):
                fh.write(line + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_registry(path: str) -> Registry:
    with open(path, encoding="utf-8") as fh:
        return parse_registry(fh.read().splitlines())


def parse_registry(lines) -> Registry:
    buckets: dict[str, list] = {}
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except ValueError as exc:
            raise HomeError("STORE_ERROR", f"line {lineno}: {exc}") from None
        if not isinstance(obj, dict):
            raise HomeError("STORE_ERROR", f"line {lineno}: expected an object")
        buckets.setdefault(obj.get("t", ""), []).append((lineno, obj))

    reg = Registry()

    def apply(kind: str, fn):
        for lineno, obj in buckets.pop(kind, []):
            try:
                fn(obj)
            except HomeError:
                raise
            except (KeyError, ValueError, TypeError) as exc:
                raise HomeError("STORE_ERROR", f"line {lineno}: {exc!r}") from None

    apply("device", lambda o: reg.register_device(device_from_json(o)))
    apply("robot", lambda o: reg.register_robot(robot_from_json(o)))
    apply("user", lambda o: reg.users.__setitem__(
        o["username"], UserCred(o["username"], o["digest"])))
    apply("phone", lambda o: reg.allowed_phones.add(o["number"]))

    def add_wall(o):
        wall = MapPolyline(o["width"], tuple(o["rgb"]), [tuple(v) for v in o["vertices"]])
        wall.check()
        reg.map_walls.append(wall)

    def add_icon(o):
        reg.map_icons.append(MapIcon(o["oid"], o["name"], tuple(o["pos"]), o["icon_id"]))

    apply("wall", add_wall)
    apply("icon", add_icon)

    def add_scenario(o):
        scn = scenario_from_json(o)
        reg.scenarios[scn.name] = scn

    def add_rule(o):
        rule = rule_from_json(o)
        reg.rules[rule.name] = rule

    apply("scenario", add_scenario)
    apply("rule", add_rule)
    # anything left in buckets is a record type this build does not know
    return reg
