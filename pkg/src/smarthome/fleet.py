"""Simulated device and robot fleet behind the registry.

Devices are either latched (they hold whatever state a verb put them
in) or scripted (a step-hold schedule replays sensor readings against
the virtual clock, e.g. a temperature curve).  Robots run one job at a
time from a FIFO queue; a job is a self-action or a delegated device
verb, and takes a configured number of seconds during which the robot
reports busy.  All effects are applied through ``Registry.set_status``
so they land in the journals and the status pages like real traffic.
"""

from __future__ import annotations

import itertools
import json
from collections import deque
from dataclasses import dataclass, field
from datetime import datetime, timedelta

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
    domain_from_json,
    trunc,
)
from .scenario import Actor, parse_scenario

_BINARY_VERBS = {"on": True, "off": False}
_APERTURE_VERBS = {"open": True, "close": False}
_PRESENCE_VERBS = {"appear": True, "disappear": False}


def transition_for(rec: DeviceRecord, verb: str, param: str | None) -> Status:
    """Status a device verb leaves behind; DEVICE_ERROR when it has none."""
    if rec.kind is Kind.SENSOR:
        raise HomeError("DEVICE_ERROR", f"{rec.name!r} is a sensor, it takes no commands")
    v = verb.lower()
    if rec.category is Category.ON_OFF and v in _BINARY_VERBS:
        return Status.binary(_BINARY_VERBS[v])
    if rec.category is Category.OPENED_CLOSED and v in _APERTURE_VERBS:
        return Status.aperture(_APERTURE_VERBS[v])
    if rec.category is Category.APPEARING_DISAPPEARING and v in _PRESENCE_VERBS:
        return Status.presence(_PRESENCE_VERBS[v])
    if rec.category is Category.LEVELED and v == "set":
        try:
            return Status.level(int(param))
        except (TypeError, ValueError):
            raise HomeError("DEVICE_ERROR", f"set needs an integer level, got {param!r}") from None
    if rec.category is Category.CUSTOM:
        return Status.text(f"{verb} {param}" if param else verb)
    raise HomeError("DEVICE_ERROR", f"verb {verb!r} has no effect on a {rec.category.value} device")


def status_for_reading(rec: DeviceRecord, value) -> Status:
    if rec.category is Category.LEVELED:
        return Status.level(int(value))
    if rec.category is Category.ON_OFF:
        return Status.binary(bool(value))
    if rec.category is Category.OPENED_CLOSED:
        return Status.aperture(bool(value))
    if rec.category is Category.APPEARING_DISAPPEARING:
        return Status.presence(bool(value))
    return Status.text(str(value))


@dataclass
class Script:
    """Step-hold schedule: reading holds its value until the next point."""

    initial: object
    points: list[tuple[int, object]]  # (seconds from clock start, value), ascending

    def value_at(self, offset: int):
        value = self.initial
        for at, point in self.points:
            if at > offset:
                break
            value = point
        return value


@dataclass
class Job:
    verb: str
    param: str | None
    kind: str = "self"  # self | delegate
    oid: int = 0

    def label(self) -> str:
        return f"{self.verb} ({self.param})" if self.param else self.verb


@dataclass
class SimRobot:
    rec: RobotRecord
    location: str
    latencies: dict[str, int] = field(default_factory=dict)
    travel_seconds: int = 0  # extra latency on delegated jobs (room change)
    carrying: str | None = None
    queue: deque = field(default_factory=deque)
    current: Job | None = None
    busy_until: datetime | None = None


class Fleet:
    """Owns the behavioral state; the registry holds the observable state.

    ``start`` anchors script offsets; the runtime sets it when the clock
    is created.
    """

    def __init__(self, reg: Registry):
        self.reg = reg
        self.start: datetime | None = None
        self.scripts: dict[int, Script] = {}
        self.robots: dict[int, SimRobot] = {}
        self.device_latencies: dict[int, dict[str, int]] = {}
        self._applied: dict[int, object] = {}
        self._device_jobs: list = []  # (finish_at, seq, oid, status, actor)
        self._job_seq = itertools.count()

    def add_script(self, oid: int, script: Script) -> None:
        self.scripts[oid] = script

    def add_robot(self, sim: SimRobot) -> None:
        self.robots[sim.rec.rid] = sim

    def read(self, oid: int, at: datetime):
        """Status at an instant: scripted series value, or the stored state."""
        rec = self.reg.devices.get(oid)
        if rec is None:
            raise HomeError("UNKNOWN_OID", f"no device with oid {oid}")
        script = self.scripts.get(oid)
        if script is not None and self.start is not None:
            offset = int((trunc(at) - self.start).total_seconds())
            return status_for_reading(rec, script.value_at(offset))
        return rec.status

    # -- clock ------------------------------------------------------------

    def on_second(self, now: datetime) -> None:
        """Advance scripted sensors and robot queues to ``now``."""
        if self.start is None:
            raise HomeError("CLOCK_ERROR", "fleet clock anchor not set")
        offset = int((now - self.start).total_seconds())
        due = sorted(j for j in self._device_jobs if j[0] <= now)
        self._device_jobs = [j for j in self._device_jobs if j[0] > now]
        for finish_at, _, oid, status, actor in due:
            self.reg.set_status(oid, status, finish_at, actor=actor)
        for oid in sorted(self.scripts):
            value = self.scripts[oid].value_at(offset)
            if self._applied.get(oid, object()) != value:
                rec = self.reg.devices[oid]
                self.reg.set_status(oid, status_for_reading(rec, value), now, actor="device")
                self._applied[oid] = value
        for rid in sorted(self.robots):
            self._pump(self.robots[rid], now)

    def _latency(self, sim: SimRobot, job: Job) -> int:
        latency = int(sim.latencies.get(job.verb, sim.latencies.get("*", 0)))
        if job.kind == "delegate":
            latency += sim.travel_seconds
        return latency

    def _finish(self, sim: SimRobot, job: Job, at: datetime) -> None:
        verb = job.verb.lower()
        if job.kind == "delegate":
            rec = self.reg.devices.get(job.oid)
            if rec is not None:
                if rec.room:  # the robot acts at the device, not remotely
                    sim.location = rec.room
                self.reg.set_status(
                    job.oid, transition_for(rec, job.verb, job.param), at,
                    actor=f"robot:{sim.rec.rid}",
                )
        elif verb == "goto":
            sim.location = job.param or sim.location
        elif verb in ("pickup", "pick", "grab"):
            sim.carrying = job.param
        elif verb in ("putinto", "putdown", "drop", "place"):
            sim.carrying = None

    def _pump(self, sim: SimRobot, now: datetime) -> None:
        while True:
            if sim.current is not None:
                if sim.busy_until is not None and now < sim.busy_until:
                    return
                self._finish(sim, sim.current, sim.busy_until or now)
                sim.current = None
                sim.busy_until = None
            if not sim.queue:
                return
            sim.current = sim.queue.popleft()
            sim.busy_until = now + timedelta(seconds=self._latency(sim, sim.current))

    # -- dispatch ---------------------------------------------------------

    def perform(self, actor: Actor, verb: str, param: str | None, now: datetime):
        """Execute one command; returns (outcome, note) for the trace."""
        now = trunc(now)
        try:
            if actor.kind == "device":
                rec = self.reg.device_by_name(actor.device)
                if rec is None:
                    return "error", f"unknown device {actor.device!r}"
                final = transition_for(rec, verb, param)
                latency = self.device_latencies.get(rec.oid, {}).get(verb.lower(), 0)
                if latency > 0:
                    job = Job(verb, param)
                    self.reg.set_status(rec.oid, Status.busy(job.label()), now, actor="server")
                    self._device_jobs.append(
                        (now + timedelta(seconds=latency), next(self._job_seq),
                         rec.oid, final, "server"))
                else:
                    self.reg.set_status(rec.oid, final, now, actor="server")
                return "ok", None

            robot = self.reg.robot_by_name(actor.robot)
            if robot is None:
                return "error", f"unknown robot {actor.robot!r}"
            sim = self.robots.get(robot.rid)
            if sim is None:
                return "error", f"robot {robot.name!r} has no simulator"
            if not robot.enabled:
                return "skipped", f"robot {robot.name!r} is disabled"

            if actor.kind == "robot":
                canonical = next(
                    (v for v in robot.self_actions if v.lower() == verb.lower()), None)
                if canonical is None:
                    return "error", f"{robot.name!r} has no action {verb!r}"
                if not robot.action_is_enabled(canonical):
                    return "skipped", f"action {canonical!r} of {robot.name!r} is disabled"
                sim.queue.append(Job(canonical, param))
            else:
                device = self.reg.device_by_name(actor.device)
                if device is None:
                    return "error", f"unknown device {actor.device!r}"
                pair = next(
                    ((oid, v) for oid, v in robot.delegations
                     if oid == device.oid and v.lower() == verb.lower()),
                    None,
                )
                if pair is None:
                    return "error", f"{robot.name!r} may not perform {verb!r} on {device.name!r}"
                if not robot.action_is_enabled(pair[1]):
                    return "skipped", f"action {pair[1]!r} of {robot.name!r} is disabled"
                sim.queue.append(Job(pair[1], param, kind="delegate", oid=device.oid))
            self._pump(sim, now)
            return "ok", None
        except HomeError as exc:
            return "error", exc.detail or exc.code

    # -- reporting --------------------------------------------------------

    def robot_states(self) -> list[dict]:
        out = []
        for rid in sorted(self.robots):
            sim = self.robots[rid]
            state = f"Busy: {sim.current.label()}" if sim.current else "Idle"
            entry = {
                "rid": rid,
                "name": sim.rec.name,
                "enabled": sim.rec.enabled,
                "location": sim.location,
                "state": state,
                "queued": len(sim.queue),
            }
            if sim.carrying:
                entry["carrying"] = sim.carrying
            out.append(entry)
        return out


# ---------------------------------------------------------------------------
# configuration loading

_KINDS = {k.value: k for k in Kind}
_CATEGORIES = {c.value: c for c in Category}
_TIERS = {t.value: t for t in Tier}


def _device_from_config(obj: dict) -> DeviceRecord:
    return DeviceRecord(
        oid=int(obj["oid"]),
        name=obj["name"],
        kind=_KINDS[obj["kind"]],
        category=_CATEGORIES[obj["category"]],
        verbs={v: domain_from_json(d) for v, d in obj.get("verbs", {}).items()},
        tier=_TIERS[obj.get("tier", "ambient")],
        room=obj.get("room", ""),
        icon=obj.get("icon", ""),
        level_range=tuple(obj.get("level_range", (0, 100))),
    )


def _robot_from_config(obj: dict) -> RobotRecord:
    return RobotRecord(
        rid=int(obj["rid"]),
        name=obj["name"],
        self_actions={v: domain_from_json(d) for v, d in obj.get("self_actions", {}).items()},
        delegations={(int(oid), verb) for oid, verb in obj.get("delegations", [])},
        home=obj.get("home", ""),
    )


def load_fleet(source) -> tuple[Registry, Fleet]:
    """Build a registry and fleet from a home-configuration file or dict.

    The configuration carries devices (with optional ``sim`` scripts),
    robots (with per-verb job latencies), the wall/icon map, and any
    scenarios shipped with the home.
    """
    if isinstance(source, str):
        with open(source, encoding="utf-8") as fh:
            obj = json.load(fh)
    else:
        obj = source

    devices = obj.get("devices", [])
    if not devices:
        raise HomeError("CONFIG_ERROR", "a home needs at least one device")

    reg = Registry()
    fleet = Fleet(reg)
    try:
        for dev in devices:
            rec = _device_from_config(dev)
            reg.register_device(rec)
            sim = dev.get("sim", {})
            if sim.get("behavior") == "scripted":
                if rec.kind is Kind.ACTUATOR:
                    raise HomeError(
                        "CONFIG_ERROR", f"{rec.name!r} is a pure actuator, it has no readings")
                script = Script(
                    initial=sim.get("initial", 0),
                    points=sorted((int(at), val) for at, val in sim.get("script", [])),
                )
                fleet.add_script(rec.oid, script)
                rec.status = status_for_reading(rec, script.initial)
            if dev.get("latencies"):
                fleet.device_latencies[rec.oid] = {
                    k.lower(): int(v) for k, v in dev["latencies"].items()}
        for rob in obj.get("robots", []):
            rec = _robot_from_config(rob)
            reg.register_robot(rec)
            fleet.add_robot(SimRobot(
                rec=rec,
                location=rec.home or rob.get("location", ""),
                latencies={k: int(v) for k, v in rob.get("latencies", {}).items()},
                travel_seconds=int(rob.get("travel_seconds", 0)),
            ))
        for wall in obj.get("map", {}).get("walls", []):
            poly = MapPolyline(
                int(wall["width"]),
                tuple(wall["rgb"]),
                [tuple(v) for v in wall["vertices"]],
            )
            poly.check()
            reg.map_walls.append(poly)
        for icon in obj.get("map", {}).get("icons", []):
            reg.map_icons.append(MapIcon(
                int(icon["oid"]), icon["name"], tuple(icon["pos"]), icon["icon_id"]))
        for text in obj.get("scenarios", []):
            scn = parse_scenario(text, reg)
            reg.scenarios[scn.name] = scn
    except HomeError as exc:
        raise HomeError("CONFIG_ERROR", str(exc)) from None
    except (KeyError, ValueError, TypeError) as exc:
        raise HomeError("CONFIG_ERROR", repr(exc)) from None
    return reg, fleet
