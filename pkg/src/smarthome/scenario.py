"""Scenario language: parsing, validation and timeline expansion.

A scenario is a named, ordered list of tasks.  A task is either a timed
action (device verb, robot self-action, or robot-on-device delegation)
or a bracketed reference to another scenario, optionally carrying a time
that overrides the child's activation instant.

Text form, one task per line::

    Scenario name: Clean Home
    A. Cleaning robot: Clean (Bathtub) @ Now
    B. [Gather Dishes] @ 10:00
    C. Home robot→Washing machine: on @ 10:05
    D. Cleaning robot: Clean (Saloon) @ 10:05

Ordinal prefixes are optional, "->" is accepted for the delegation
arrow, and 12-hour AM/PM clock times are accepted on input (normalized
to 24-hour internally and on output).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import TYPE_CHECKING, Iterator

from .errors import HomeError, ParseError
from .model import trunc

if TYPE_CHECKING:  # pragma: no cover
    from .model import Registry


@dataclass(frozen=True)
class TimeSpec:
    """Now | At(hour, minute) | After(minutes)."""

    kind: str  # now | at | after
    hour: int = 0
    minute: int = 0
    minutes: int = 0

    @classmethod
    def now(cls) -> "TimeSpec":
        return cls("now")

    @classmethod
    def at(cls, hour: int, minute: int) -> "TimeSpec":
        if not (0 <= hour <= 23 and 0 <= minute <= 59):
            raise HomeError("INVALID_TIME", f"{hour}:{minute:02d} out of range")
        return cls("at", hour=hour, minute=minute)

    @classmethod
    def after(cls, minutes: int) -> "TimeSpec":
        if minutes < 1:
            raise HomeError("INVALID_TIME", "relative offset must be >= 1 minute")
        return cls("after", minutes=minutes)

    def render(self) -> str:
        if self.kind == "now":
            return "Now"
        if self.kind == "at":
            return f"{self.hour}:{self.minute:02d}"
        return f"In {self.minutes} Minutes"


@dataclass(frozen=True)
class Actor:
    """Device(name) | RobotSelf(name) | RobotOnDevice(robot, device).

    Actors are stored by registry name (canonical spelling once parsed
    against a registry); they resolve to numeric ids at validation and
    dispatch time.
    """

    kind: str  # device | robot | robot_on_device
    robot: str | None = None
    device: str | None = None

    @classmethod
    def for_device(cls, name: str) -> "Actor":
        return cls("device", device=name)

    @classmethod
    def robot_self(cls, name: str) -> "Actor":
        return cls("robot", robot=name)

    @classmethod
    def robot_on_device(cls, robot: str, device: str) -> "Actor":
        return cls("robot_on_device", robot=robot, device=device)

    def render(self) -> str:
        if self.kind == "device":
            return self.device
        if self.kind == "robot":
            return self.robot
        return f"{self.robot}→{self.device}"


@dataclass(frozen=True)
class Action:
    actor: Actor
    verb: str
    param: str | None
    time: TimeSpec


@dataclass(frozen=True)
class ScenarioRef:
    name: str
    override_time: TimeSpec | None = None


Task = Action | ScenarioRef


@dataclass
class Scenario:
    name: str
    tasks: tuple[Task, ...]
    enabled: bool = True

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return (
            self.name == other.name
            and tuple(self.tasks) == tuple(other.tasks)
            and self.enabled == other.enabled
        )


@dataclass(frozen=True)
class Command:
    """A fully resolved actuation event: absolute instant, actor, verb."""

    due: datetime
    actor: Actor
    verb: str
    param: str | None
    provenance: tuple[str, ...]


@dataclass(frozen=True)
class Violation:
    code: str
    message: str

    def __str__(self):
        return f"{self.code}: {self.message}"


# ---------------------------------------------------------------------------
# parsing

_ORDINAL = re.compile(r"^(?:[A-Za-z]{1,3}|\d{1,3})\.\s+")
_HEADER = re.compile(r"^scenario\s+name\s*:\s*(?P<name>.+?)\s*$", re.IGNORECASE)
_TIME_12H = re.compile(r"^(\d{1,2}):(\d{2})\s*(AM|PM)$", re.IGNORECASE)
_TIME_24H = re.compile(r"^(\d{1,2}):(\d{2})$")
_TIME_REL = re.compile(r"^in\s+(\d+)\s+minutes?$", re.IGNORECASE)
_ACTION = re.compile(
    r"^(?P<verb>[^(@]+?)\s*(?:\(\s*(?P<param>[^)]*?)\s*\))?\s*@\s*(?P<time>.+?)$"
)


def parse_time(text: str, line: int | None = None) -> TimeSpec:
    text = text.strip()
    if text.lower() == "now":
        return TimeSpec.now()
    m = _TIME_REL.match(text)
    if m:
        minutes = int(m.group(1))
        if minutes < 1:
            raise ParseError(f"relative offset must be >= 1 minute, got {minutes}", line)
        return TimeSpec.after(minutes)
    m = _TIME_12H.match(text)
    if m:
        hour, minute, half = int(m.group(1)), int(m.group(2)), m.group(3).upper()
        if not (1 <= hour <= 12 and 0 <= minute <= 59):
            raise ParseError(f"bad 12-hour time {text!r}", line)
        hour = hour % 12 + (12 if half == "PM" else 0)
        return TimeSpec.at(hour, minute)
    m = _TIME_24H.match(text)
    if m:
        hour, minute = int(m.group(1)), int(m.group(2))
        if not (0 <= hour <= 23 and 0 <= minute <= 59):
            raise ParseError(f"bad 24-hour time {text!r}", line)
        return TimeSpec.at(hour, minute)
    raise ParseError(f"expected 'Now', 'H:MM [AM|PM]' or 'In N Minutes', got {text!r}", line)


def _strip_prefix(raw: str) -> str:
    text = raw.strip()
    if text[:2] in ("- ", "* "):
        text = text[2:].lstrip()
    return _ORDINAL.sub("", text)


def _parse_task(raw: str, line: int) -> Task:
    text = _strip_prefix(raw)
    if text.startswith("["):
        end = text.find("]")
        if end < 0:
            raise ParseError("unterminated scenario reference, expected ']'", line)
        name = text[1:end].strip()
        if not name:
            raise ParseError("empty scenario reference", line)
        rest = text[end + 1 :].strip()
        override = None
        if rest:
            if not rest.startswith("@"):
                raise ParseError(f"expected '@ <time>' after reference, got {rest!r}", line)
            override = parse_time(rest[1:], line)
        return ScenarioRef(name, override)

    head, sep, rest = text.partition(":")
    if not sep:
        raise ParseError("expected '<actor>: <verb> [(param)] @ <time>'", line)
    head = head.strip()
    if not head:
        raise ParseError("empty actor name", line)
    arrow = "→" if "→" in head else ("->" if "->" in head else None)
    if arrow:
        robot, _, device = head.partition(arrow)
        robot, device = robot.strip(), device.strip()
        if not robot or not device:
            raise ParseError("delegation needs both a robot and a device name", line)
        actor = Actor.robot_on_device(robot, device)
    else:
        actor = Actor.for_device(head)

    m = _ACTION.match(rest.strip())
    if not m:
        raise ParseError("expected '<verb> [(param)] @ <time>'", line)
    verb = m.group("verb").strip()
    if not verb:
        raise ParseError("empty verb", line)
    param = m.group("param")
    if param is not None:
        param = param.strip()
        if not param:
            raise ParseError("empty parameter", line)
    return Action(actor, verb, param, parse_time(m.group("time"), line))


def parse_scenario(text: str, reg: "Registry | None" = None) -> Scenario:
    """Parse scenario text into an AST.

    With a registry, actor and scenario names are resolved to their
    canonical spelling and single-name actors are re-kinded to robot
    self-actions when the name matches a robot (robots take precedence
    over devices).  Without one, single-name actors stay device refs.
    """
    name = None
    tasks: list[Task] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        if name is None:
            m = _HEADER.match(raw.strip())
            if not m:
                raise ParseError("expected header 'Scenario name: <name>'", lineno)
            name = m.group("name")
            continue
        tasks.append(_parse_task(raw, lineno))
    if name is None:
        raise ParseError("empty scenario text", 1)
    if not tasks:
        raise ParseError("a scenario needs at least one task", 1)
    scn = Scenario(name, tuple(tasks))
    return canonicalize(scn, reg) if reg is not None else scn


def parse_task(text: str, line: int | None = None) -> Task:
    """One task in the line grammar (rules reuse this for 'then' clauses)."""
    return _parse_task(text, line if line is not None else 1)


def render_task(task: Task) -> str:
    if isinstance(task, ScenarioRef):
        suffix = f" @ {task.override_time.render()}" if task.override_time else ""
        return f"[{task.name}]{suffix}"
    param = f" ({task.param})" if task.param is not None else ""
    return f"{task.actor.render()}: {task.verb}{param} @ {task.time.render()}"


def _letters(index: int) -> str:
    # 1 -> A, 26 -> Z, 27 -> AA ...
    out = ""
    while index > 0:
        index, rem = divmod(index - 1, 26)
        out = chr(ord("A") + rem) + out
    return out


def print_scenario(s: Scenario) -> str:
    """Canonical text form; ``parse_scenario`` inverts it."""
    lines = [f"Scenario name: {s.name}"]
    for i, task in enumerate(s.tasks, start=1):
        lines.append(f"{_letters(i)}. {render_task(task)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# resolution against the registry

def canonicalize(s: Scenario, reg: "Registry") -> Scenario:
    """Rewrite names to registry spelling; re-kind robot actors."""

    def fix_actor(actor: Actor) -> Actor:
        if actor.kind == "robot_on_device":
            robot = reg.robot_by_name(actor.robot)
            device = reg.device_by_name(actor.device)
            return Actor.robot_on_device(
                robot.name if robot else actor.robot,
                device.name if device else actor.device,
            )
        name = actor.device if actor.kind == "device" else actor.robot
        robot = reg.robot_by_name(name)
        if robot is not None:
            return Actor.robot_self(robot.name)
        device = reg.device_by_name(name)
        if device is not None:
            return Actor.for_device(device.name)
        return actor

    fixed: list[Task] = []
    for task in s.tasks:
        if isinstance(task, ScenarioRef):
            child = reg.scenario_by_name(task.name)
            fixed.append(ScenarioRef(child.name if child else task.name, task.override_time))
        else:
            fixed.append(Action(fix_actor(task.actor), task.verb, task.param, task.time))
    return Scenario(s.name, tuple(fixed), s.enabled)


def _verb_lookup(verbs: dict, verb: str):
    if verb in verbs:
        return verb, verbs[verb]
    wanted = verb.lower()
    for known, dom in verbs.items():
        if known.lower() == wanted:
            return known, dom
    return None, None


def validate(s: Scenario, reg: "Registry") -> list[Violation]:
    """Check names, capabilities, parameter domains, enablement, cycles."""
    violations: list[Violation] = []

    def check_param(dom, verb: str, param: str | None, who: str):
        if not dom.accepts(param):
            if dom.kind == "none" and param is not None:
                msg = f"{who}: verb {verb!r} takes no parameter"
            elif param is None:
                msg = f"{who}: verb {verb!r} requires a {dom.describe()} parameter"
            else:
                msg = f"{who}: parameter {param!r} outside domain {dom.describe()}"
            violations.append(Violation("PARAM_MISMATCH", msg))

    def check_action(task: Action):
        actor = task.actor
        if actor.kind == "robot_on_device":
            robot = reg.robot_by_name(actor.robot)
            device = reg.device_by_name(actor.device)
            if robot is None:
                violations.append(Violation("UNKNOWN_ACTOR", f"no robot named {actor.robot!r}"))
            if device is None:
                violations.append(Violation("UNKNOWN_ACTOR", f"no device named {actor.device!r}"))
            if robot is None or device is None:
                return
            pair = next(
                ((oid, verb) for oid, verb in robot.delegations
                 if oid == device.oid and verb.lower() == task.verb.lower()),
                None,
            )
            if pair is None:
                violations.append(Violation(
                    "UNKNOWN_CAPABILITY",
                    f"{robot.name!r} may not perform {task.verb!r} on {device.name!r}",
                ))
                return
            if not robot.enabled:
                violations.append(Violation("ROBOT_DISABLED", f"robot {robot.name!r} is disabled"))
            elif not robot.action_is_enabled(pair[1]):
                violations.append(Violation(
                    "ACTION_DISABLED", f"action {pair[1]!r} of {robot.name!r} is disabled"))
            verb, dom = _verb_lookup(device.verbs, task.verb)
            if dom is not None:
                check_param(dom, verb, task.param, device.name)
            return

        # single-name actor: robots take precedence over devices
        name = actor.robot if actor.kind == "robot" else actor.device
        robot = reg.robot_by_name(name)
        if robot is not None:
            verb, dom = _verb_lookup(robot.self_actions, task.verb)
            if dom is None:
                violations.append(Violation(
                    "UNKNOWN_CAPABILITY", f"{robot.name!r} has no action {task.verb!r}"))
                return
            if not robot.enabled:
                violations.append(Violation("ROBOT_DISABLED", f"robot {robot.name!r} is disabled"))
            elif not robot.action_is_enabled(verb):
                violations.append(Violation(
                    "ACTION_DISABLED", f"action {verb!r} of {robot.name!r} is disabled"))
            check_param(dom, verb, task.param, robot.name)
            return
        device = reg.device_by_name(name)
        if device is None:
            violations.append(Violation("UNKNOWN_ACTOR", f"no device or robot named {name!r}"))
            return
        verb, dom = _verb_lookup(device.verbs, task.verb)
        if dom is None:
            violations.append(Violation(
                "UNKNOWN_CAPABILITY", f"{device.name!r} does not accept verb {task.verb!r}"))
            return
        check_param(dom, verb, task.param, device.name)

    def check_tasks(scn: Scenario):
        for task in scn.tasks:
            if isinstance(task, Action):
                check_action(task)
            elif reg.scenario_by_name(task.name) is None:
                violations.append(Violation(
                    "UNKNOWN_SCENARIO", f"reference to unknown scenario {task.name!r}"))

    # cycle detection over the reference graph reachable from s
    state: dict[str, int] = {}  # 1 = on stack, 2 = done

    def dfs(scn: Scenario, stack: list[str]):
        key = scn.name.lower()
        state[key] = 1
        stack.append(scn.name)
        for ref in refs_of(scn):
            child = reg.scenario_by_name(ref.name)
            if child is None:
                continue
            ckey = child.name.lower()
            if state.get(ckey) == 1:
                lowered = [n.lower() for n in stack]
                cycle = stack[lowered.index(ckey):] + [child.name]
                violations.append(Violation("CYCLE", "→".join(cycle)))
            elif state.get(ckey) != 2:
                if child.enabled:
                    # disabled children expand to nothing, so their broken
                    # actions must not block activating the parent
                    check_tasks(child)
                dfs(child, stack)
        stack.pop()
        state[key] = 2

    check_tasks(s)
    dfs(s, [])
    return violations


def refs_of(s: Scenario) -> Iterator[ScenarioRef]:
    for task in s.tasks:
        if isinstance(task, ScenarioRef):
            yield task


def resolve_time(spec: TimeSpec, activation: datetime) -> datetime:
    """Absolute instant for a time spec relative to an activation instant.

    Clock times resolve to the first instant >= activation with that
    wall-clock time: same day if still ahead, otherwise the next day.
    """
    activation = trunc(activation)
    if spec.kind == "now":
        return activation
    if spec.kind == "after":
        return activation + timedelta(minutes=spec.minutes)
    candidate = activation.replace(hour=spec.hour, minute=spec.minute, second=0)
    if candidate < activation:
        candidate += timedelta(days=1)
    return candidate


def expand(
    s: Scenario,
    activation: datetime,
    reg: "Registry",
    skipped: list | None = None,
) -> list[Command]:
    """Depth-first expansion into an absolute, sorted command timeline.

    A nested reference expands with the resolved override time as its
    activation when one is set, else it inherits the parent's.  Disabled
    nested scenarios expand to nothing (recorded in ``skipped``).  Ties
    in the final due-sorted list keep depth-first definition order.
    """

    out: list[Command] = []

    def walk(scn: Scenario, act: datetime, path: tuple[str, ...]):
        path = path + (scn.name,)
        for task in scn.tasks:
            if isinstance(task, Action):
                out.append(Command(
                    resolve_time(task.time, act), task.actor, task.verb, task.param, path))
            else:
                child = reg.scenario_by_name(task.name)
                child_act = (
                    resolve_time(task.override_time, act) if task.override_time else act
                )
                if not child.enabled:
                    if skipped is not None:
                        skipped.append((child.name, child_act))
                    continue
                walk(child, child_act, path)

    walk(s, trunc(activation), ())
    out.sort(key=lambda c: c.due)  # stable: ties keep depth-first order
    return out


def manage(reg: "Registry", name: str, op: str) -> None:
    """enable / disable / delete a stored scenario."""
    scn = reg.scenario_by_name(name)
    if scn is None:
        raise HomeError("UNKNOWN_SCENARIO", f"no scenario named {name!r}")
    if op == "enable":
        scn.enabled = True
    elif op == "disable":
        scn.enabled = False
    elif op == "delete":
        holders = [
            other.name
            for other in reg.scenarios.values()
            if other is not scn
            and any(r.name.lower() == scn.name.lower() for r in refs_of(other))
        ]
        holders += [
            f"rule {rule.name!r}"
            for rule in reg.rules.values()
            if any(
                isinstance(t, ScenarioRef) and t.name.lower() == scn.name.lower()
                for t in rule.actions
            )
        ]
        if holders:
            raise HomeError(
                "STILL_REFERENCED", f"{scn.name!r} is referenced by {', '.join(holders)}")
        for key, value in list(reg.scenarios.items()):
            if value is scn:
                del reg.scenarios[key]
    else:
        raise HomeError("BAD_OP", f"unknown scenario operation {op!r}")


# ---------------------------------------------------------------------------
# JSON shape (persistence and the wire both reuse it)

def actor_to_json(actor: Actor) -> dict:
    if actor.kind == "device":
        return {"device": actor.device}
    if actor.kind == "robot":
        return {"robot": actor.robot}
    return {"robot": actor.robot, "device": actor.device}


def actor_from_json(obj: dict) -> Actor:
    robot, device = obj.get("robot"), obj.get("device")
    if robot and device:
        return Actor.robot_on_device(robot, device)
    if robot:
        return Actor.robot_self(robot)
    if device:
        return Actor.for_device(device)
    raise HomeError("INVALID_RECORD", f"actor needs a robot or device name: {obj!r}")


def task_to_json(task: Task) -> dict:
    if isinstance(task, ScenarioRef):
        out = {"ref": task.name}
        if task.override_time is not None:
            out["time"] = task.override_time.render()
        return out
    out = {"actor": actor_to_json(task.actor), "verb": task.verb, "time": task.time.render()}
    if task.param is not None:
        out["param"] = task.param
    return out


def task_from_json(obj: dict) -> Task:
    if "ref" in obj:
        override = parse_time(obj["time"]) if "time" in obj else None
        return ScenarioRef(obj["ref"], override)
    return Action(
        actor_from_json(obj["actor"]),
        obj["verb"],
        obj.get("param"),
        parse_time(obj["time"]),
    )


def scenario_to_json(s: Scenario) -> dict:
    return {
        "name": s.name,
        "enabled": s.enabled,
        "tasks": [task_to_json(t) for t in s.tasks],
    }


def scenario_from_json(obj: dict) -> Scenario:
    tasks = tuple(task_from_json(t) for t in obj["tasks"])
    if not tasks:
        raise HomeError("INVALID_RECORD", f"scenario {obj.get('name')!r} has no tasks")
    return Scenario(obj["name"], tasks, bool(obj.get("enabled", True)))
