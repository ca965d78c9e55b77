"""Scheduler: virtual clock, command queue, polling and rule cadences.

The clock advances in whole seconds.  Each second, in order: the fleet
simulation advances, device tiers whose polling interval divides the
offset from clock start are polled, the rules engine runs on the
security cadence, and commands that have come due are dispatched.
Commands due at the activation instant itself dispatch before the clock
moves.  Every dispatch appends one line to the trace; replaying the
same inputs yields a byte-identical trace file.
"""

from __future__ import annotations

import heapq
import itertools
import json
from collections import Counter
from dataclasses import dataclass
from datetime import datetime, timedelta

from .errors import HomeError
from .fleet import Fleet
from .model import Registry, Tier, format_instant, trunc
from .rules import evaluate
from .scenario import Actor, Scenario, expand, validate

POLL_SECONDS = {Tier.VITAL: 1, Tier.SECURITY: 5, Tier.AMBIENT: 60}

# Violations that block activation outright.  Enablement violations do
# not: a robot disabled now may be back before the command comes due, so
# those are re-checked at dispatch and skipped there if still disabled.
_BLOCKING = {"UNKNOWN_ACTOR", "UNKNOWN_CAPABILITY", "UNKNOWN_SCENARIO",
             "PARAM_MISMATCH", "CYCLE"}


@dataclass(frozen=True)
class Activation:
    ticket: int
    scheduled: int
    skipped: tuple


class Runtime:
    def __init__(self, reg: Registry, fleet: Fleet, start: datetime,
                 poll_seconds: dict | None = None):
        self.reg = reg
        self.fleet = fleet
        self.start = trunc(start)
        self.now = self.start
        fleet.start = self.start
        self.poll_seconds = dict(POLL_SECONDS)
        if poll_seconds:
            for tier, seconds in poll_seconds.items():
                self.poll_seconds[Tier(tier) if isinstance(tier, str) else tier] = int(seconds)
        self.pending: list = []  # heap of (due, seq, ticket, Command)
        self._seq = itertools.count()
        self._ticket = itertools.count(1)
        self.known_tickets: set[int] = set()
        self.poll_counts: Counter = Counter()
        self.trace: list[dict] = []
        self.notes: list[str] = []
        self._conflict_at: datetime | None = None
        self._conflict_seen: dict[int, tuple] = {}

    # -- activation / cancellation -----------------------------------------

    def activate_scenario(self, name: str, at: datetime | None = None) -> Activation:
        scn = self.reg.scenario_by_name(name)
        if scn is None:
            raise HomeError("UNKNOWN_SCENARIO", f"no scenario named {name!r}")
        if not scn.enabled:
            raise HomeError("SCENARIO_DISABLED", f"{scn.name!r} is disabled")
        violations = validate(scn, self.reg)
        blocking = [v for v in violations if v.code in _BLOCKING]
        if blocking:
            exc = HomeError("VALIDATION_FAILED", "; ".join(str(v) for v in blocking))
            exc.violations = blocking
            raise exc
        for v in violations:
            self.notes.append(f"activating {scn.name!r}: {v}")
        return self._schedule(scn, at if at is not None else self.now)

    def _schedule(self, scn: Scenario, at: datetime) -> Activation:
        skipped: list = []
        commands = expand(scn, at, self.reg, skipped)
        ticket = next(self._ticket)
        self.known_tickets.add(ticket)
        for cmd in commands:
            heapq.heappush(self.pending, (cmd.due, next(self._seq), ticket, cmd))
        for name, when in skipped:
            self.notes.append(f"nested scenario {name!r} is disabled, skipped at {format_instant(when)}")
        return Activation(ticket, len(commands), tuple(skipped))

    def cancel(self, ticket: int) -> int:
        """Drop a ticket's not-yet-dispatched commands; returns how many."""
        if ticket not in self.known_tickets:
            raise HomeError("UNKNOWN_TICKET", f"ticket {ticket} was never issued")
        kept = [e for e in self.pending if e[2] != ticket]
        removed = len(self.pending) - len(kept)
        self.pending = kept
        heapq.heapify(self.pending)
        return removed

    # -- clock ---------------------------------------------------------------

    def tick(self, until: datetime) -> None:
        until = trunc(until)
        if until < self.now:
            raise HomeError("CLOCK_ERROR", "the clock does not move backwards")
        self._dispatch_due(self.now)
        second = self.now + timedelta(seconds=1)
        while second <= until:
            self.now = second
            self.fleet.on_second(second)
            offset = int((second - self.start).total_seconds())
            for tier, interval in self.poll_seconds.items():
                if offset % interval == 0:
                    self._poll(tier)
            if offset % self.poll_seconds[Tier.SECURITY] == 0:
                self._rules_pass(second)
            self._dispatch_due(second)
            second += timedelta(seconds=1)

    def run_for(self, seconds: int) -> None:
        self.tick(self.now + timedelta(seconds=seconds))

    def _poll(self, tier: Tier) -> None:
        for rec in self.reg.devices.values():
            if rec.tier == tier:
                self.poll_counts[rec.oid] += 1

    def _rules_pass(self, at: datetime) -> None:
        fired = evaluate(self.reg.rules.values(), self.reg.devices, self.notes)
        for rule in fired:
            wrapper = Scenario(rule.name, rule.actions)
            blocking = [v for v in validate(wrapper, self.reg) if v.code in _BLOCKING]
            if blocking:
                self.notes.append(
                    f"rule {rule.name!r} fired but was not dispatched: "
                    + "; ".join(str(v) for v in blocking)
                )
                continue
            self._schedule(wrapper, at)

    # -- dispatch --------------------------------------------------------------

    def _note_conflicts(self, at: datetime, cmd) -> None:
        # contradictory commands to one device at the same instant execute
        # in order, but get flagged for the operator
        if cmd.actor.kind == "robot":
            return
        rec = self.reg.device_by_name(cmd.actor.device)
        if rec is None:
            return
        if self._conflict_at != at:
            self._conflict_at = at
            self._conflict_seen = {}
        previous = self._conflict_seen.get(rec.oid)
        if previous is not None and previous != (cmd.verb, cmd.param):
            self.notes.append(
                f"CONFLICT at {format_instant(at)}: {rec.name!r} got "
                f"{previous[0]!r} and {cmd.verb!r} in the same second"
            )
        self._conflict_seen[rec.oid] = (cmd.verb, cmd.param)

    def _dispatch_due(self, at: datetime) -> None:
        while self.pending and self.pending[0][0] <= at:
            _, _, _, cmd = heapq.heappop(self.pending)
            self._note_conflicts(at, cmd)
            outcome, note = self.fleet.perform(cmd.actor, cmd.verb, cmd.param, at)
            entry = {
                "t": format_instant(at),
                "actor": self._actor_code(cmd.actor),
                "verb": cmd.verb,
                "outcome": outcome,
                "provenance": list(cmd.provenance),
            }
            if cmd.param is not None:
                entry["param"] = cmd.param
            if note:
                entry["note"] = note
            self.trace.append(entry)

    def _actor_code(self, actor: Actor) -> str:
        if actor.kind == "device":
            rec = self.reg.device_by_name(actor.device)
            return f"D{rec.oid}" if rec else actor.device
        robot = self.reg.robot_by_name(actor.robot)
        rcode = f"R{robot.rid}" if robot else actor.robot
        if actor.kind == "robot":
            return rcode
        rec = self.reg.device_by_name(actor.device)
        dcode = f"D{rec.oid}" if rec else actor.device
        return f"{rcode}>{dcode}"

    # -- trace -----------------------------------------------------------------

    def trace_lines(self) -> list[str]:
        return [json.dumps(e, sort_keys=True, separators=(",", ":")) for e in self.trace]

    def write_trace(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for line in self.trace_lines():
                fh.write(line + "\n")
