"""Condition/action rules over sensor readings.

Grammar::

    when <condition> then <task> [; <task>]*

Conditions combine comparisons with ``and`` / ``or`` / ``not`` and
parentheses (``and`` binds tighter than ``or``).  A comparison names a
sensor and compares its reading: numeric sensors accept the full
comparator set, two-state sensors only ``=`` / ``!=`` against their
state labels (e.g. ``Front door = Opened``).

Rules are edge-triggered: a rule fires when its condition becomes true,
not on every evaluation while it stays true.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterator, Mapping

from .errors import ParseError
from .model import CATEGORY_LABELS, Category, DeviceRecord, Kind
from .scenario import Task, parse_task, render_task, task_from_json, task_to_json

if TYPE_CHECKING:  # pragma: no cover
    from .model import Registry

_COMPARATORS = {"<": "<", "<=": "<=", ">": ">", ">=": ">=", "=": "=", "!=": "!=",
                "≤": "<=", "≥": ">=", "≠": "!="}


@dataclass(frozen=True)
class Atom:
    """One comparison: the sensor's oid (and name for display), op, operand."""

    name: str
    oid: int
    op: str  # canonical: < <= = >= > !=
    value: str

    def atoms(self) -> Iterator["Atom"]:
        yield self

    def render(self) -> str:
        return f"{self.name} {self.op} {self.value}"


@dataclass(frozen=True)
class Not:
    arg: "Cond"

    def atoms(self) -> Iterator[Atom]:
        yield from self.arg.atoms()


@dataclass(frozen=True)
class And:
    args: tuple["Cond", ...]

    def atoms(self) -> Iterator[Atom]:
        for a in self.args:
            yield from a.atoms()


@dataclass(frozen=True)
class Or:
    args: tuple["Cond", ...]

    def atoms(self) -> Iterator[Atom]:
        for a in self.args:
            yield from a.atoms()


Cond = Atom | Not | And | Or


@dataclass
class RuleDef:
    name: str
    condition: Cond
    actions: tuple[Task, ...]
    enabled: bool = True
    # None until first evaluation; evaluation treats unknown as False
    last_state: bool | None = field(default=None, compare=False)


# ---------------------------------------------------------------------------
# lexing / parsing

_TOKEN = re.compile(r"\(|\)|<=|>=|!=|≤|≥|≠|<|>|=|[^\s()<>=!≤≥≠]+")


def _lex(text: str) -> list[str]:
    pos = 0
    tokens = []
    for m in _TOKEN.finditer(text):
        if text[pos:m.start()].strip():
            raise ParseError(f"stray {text[pos:m.start()].strip()!r} in condition")
        tokens.append(m.group())
        pos = m.end()
    if text[pos:].strip():
        raise ParseError(f"stray {text[pos:].strip()!r} in condition")
    return tokens


class _CondParser:
    def __init__(self, tokens: list[str], reg: "Registry"):
        self.tokens = tokens
        self.pos = 0
        self.reg = reg

    def peek(self) -> str | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> str:
        tok = self.peek()
        if tok is None:
            raise ParseError("condition ended unexpectedly")
        self.pos += 1
        return tok

    def parse(self) -> Cond:
        cond = self.or_expr()
        if self.peek() is not None:
            raise ParseError(f"unexpected {self.peek()!r} after condition")
        return cond

    def or_expr(self) -> Cond:
        parts = [self.and_expr()]
        while self.peek() and self.peek().lower() == "or":
            self.take()
            parts.append(self.and_expr())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def and_expr(self) -> Cond:
        parts = [self.unary()]
        while self.peek() and self.peek().lower() == "and":
            self.take()
            parts.append(self.unary())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def unary(self) -> Cond:
        tok = self.peek()
        if tok is None:
            raise ParseError("condition ended unexpectedly")
        if tok.lower() == "not":
            self.take()
            return Not(self.unary())
        if tok == "(":
            self.take()
            inner = self.or_expr()
            if self.peek() != ")":
                raise ParseError("missing ')' in condition")
            self.take()
            return inner
        return self.atom()

    def atom(self) -> Atom:
        words = []
        while self.peek() is not None and self.peek() not in _COMPARATORS and self.peek() not in ("(", ")"):
            if self.peek().lower() in ("and", "or", "not") and words:
                break
            words.append(self.take())
        if not words:
            raise ParseError(f"expected a sensor name, got {self.peek()!r}")
        op_tok = self.peek()
        if op_tok not in _COMPARATORS:
            raise ParseError(f"expected a comparator after {' '.join(words)!r}")
        op = _COMPARATORS[self.take()]
        value = self.peek()
        if value is None or value in ("(", ")") or value in _COMPARATORS:
            raise ParseError(f"expected a value after {op!r}")
        self.take()
        return self._typed_atom(" ".join(words), op, value)

    def _typed_atom(self, name: str, op: str, value: str) -> Atom:
        rec = self.reg.device_by_name(name)
        if rec is None:
            raise ParseError(f"unknown sensor {name!r}")
        if rec.category is Category.LEVELED:
            try:
                int(value)
            except ValueError:
                raise ParseError(f"{rec.name!r} reads numbers, got {value!r}") from None
        elif rec.category in CATEGORY_LABELS:
            if op not in ("=", "!="):
                raise ParseError(
                    f"comparator {op!r} not allowed for {rec.category.value} sensor {rec.name!r}")
            labels = CATEGORY_LABELS[rec.category]
            match = next((l for l in labels if l.lower() == value.lower()), None)
            if match is None:
                raise ParseError(f"{rec.name!r} reads one of {labels}, got {value!r}")
            value = match
        else:  # custom text
            if op not in ("=", "!="):
                raise ParseError(
                    f"comparator {op!r} not allowed for {rec.category.value} sensor {rec.name!r}")
        if rec.kind is Kind.ACTUATOR:
            raise ParseError(f"{rec.name!r} is an actuator, it has no readings")
        return Atom(rec.name, rec.oid, op, value)


def parse_rule(text: str, reg: "Registry", name: str = "") -> RuleDef:
    """Parse rule text; the registry types each comparison's sensor."""
    flat = " ".join(text.split())
    m = re.match(r"when\s+(?P<cond>.+?)\s+then\s+(?P<then>.+)$", flat, re.IGNORECASE)
    if not m:
        raise ParseError("expected 'when <condition> then <task>[; <task>]*'")
    cond = _CondParser(_lex(m.group("cond")), reg).parse()
    tasks = []
    for part in m.group("then").split(";"):
        part = part.strip()
        if not part:
            raise ParseError("empty task in 'then' clause")
        tasks.append(parse_task(part))
    return RuleDef(name, cond, tuple(tasks))


def _render(cond: Cond, parent: int = 0) -> str:
    # precedence: or=1, and=2, not=3, atom=4
    if isinstance(cond, Atom):
        return cond.render()
    if isinstance(cond, Not):
        text, prec = f"not {_render(cond.arg, 3)}", 3
    elif isinstance(cond, And):
        text, prec = " and ".join(_render(a, 2) for a in cond.args), 2
    else:
        text, prec = " or ".join(_render(a, 1) for a in cond.args), 1
    return f"({text})" if prec < parent else text


def print_rule(rule: RuleDef) -> str:
    then = "; ".join(render_task(t) for t in rule.actions)
    return f"when {_render(rule.condition)} then {then}"


# ---------------------------------------------------------------------------
# evaluation

def _atom_state(atom: Atom, devices: Mapping[int, DeviceRecord], notes: list[str] | None) -> bool:
    rec = devices.get(atom.oid)
    if rec is None:
        if notes is not None:
            notes.append(f"sensor oid {atom.oid} ({atom.name}) is gone, reading as false")
        return False
    status = rec.status
    if rec.category is Category.LEVELED:
        if status.kind != "level":
            return False  # busy or mismatched: no comparable reading
        want = int(atom.value)
        have = status.value
        return {
            "<": have < want, "<=": have <= want, "=": have == want,
            ">=": have >= want, ">": have > want, "!=": have != want,
        }[atom.op]
    same = status.label().lower() == atom.value.lower()
    return same if atom.op == "=" else not same


def _eval(cond: Cond, devices: Mapping[int, DeviceRecord], notes: list[str] | None) -> bool:
    if isinstance(cond, Atom):
        return _atom_state(cond, devices, notes)
    if isinstance(cond, Not):
        return not _eval(cond.arg, devices, notes)
    if isinstance(cond, And):
        return all(_eval(a, devices, notes) for a in cond.args)
    return any(_eval(a, devices, notes) for a in cond.args)


def evaluate(
    rules,
    devices: Mapping[int, DeviceRecord],
    notes: list[str] | None = None,
) -> list[RuleDef]:
    """One evaluation pass; returns the rules whose condition just became true.

    Disabled rules are skipped entirely (their remembered state freezes
    until re-enabled).
    """
    fired = []
    for rule in rules:
        if not rule.enabled:
            continue
        state = _eval(rule.condition, devices, notes)
        if state and rule.last_state is not True:
            fired.append(rule)
        rule.last_state = state
    return fired


# ---------------------------------------------------------------------------
# JSON shape

def cond_to_json(cond: Cond):
    if isinstance(cond, Atom):
        return {"name": cond.name, "oid": cond.oid, "op": cond.op, "value": cond.value}
    if isinstance(cond, Not):
        return {"not": cond_to_json(cond.arg)}
    key = "and" if isinstance(cond, And) else "or"
    return {key: [cond_to_json(a) for a in cond.args]}


def cond_from_json(obj: dict) -> Cond:
    if "not" in obj:
        return Not(cond_from_json(obj["not"]))
    if "and" in obj:
        return And(tuple(cond_from_json(a) for a in obj["and"]))
    if "or" in obj:
        return Or(tuple(cond_from_json(a) for a in obj["or"]))
    return Atom(obj["name"], obj["oid"], obj["op"], obj["value"])


def rule_to_json(rule: RuleDef) -> dict:
    return {
        "name": rule.name,
        "enabled": rule.enabled,
        "when": cond_to_json(rule.condition),
        "then": [task_to_json(t) for t in rule.actions],
    }


def rule_from_json(obj: dict) -> RuleDef:
    return RuleDef(
        obj["name"],
        cond_from_json(obj["when"]),
        tuple(task_from_json(t) for t in obj["then"]),
        bool(obj.get("enabled", True)),
    )
