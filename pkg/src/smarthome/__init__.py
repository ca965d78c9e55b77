"""Scenario-based smart-home control server with a simulated device fleet.

The server schedules named scenarios (timed device and robot actions,
nestable with time overrides) over a deterministic virtual clock,
evaluates condition/action rules against sensor readings, and speaks a
compact line protocol plus an SMS-sized fallback transport.  A CLI
client and report renderer ride on the same wire protocol.
"""

from .errors import HomeError, ParseError
from .fleet import Fleet, load_fleet
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
)
from .rules import RuleDef, evaluate, parse_rule, print_rule
from .runtime import Runtime
from .scenario import (
    Action,
    Actor,
    Command,
    Scenario,
    ScenarioRef,
    TimeSpec,
    expand,
    manage,
    parse_scenario,
    print_scenario,
    validate,
)
from .store import load_registry, save_registry
from .wire import ServerConfig, ServerCore, load_server_config

__version__ = "0.1.0"

__all__ = [
    "Action",
    "Actor",
    "Category",
    "Command",
    "DeviceRecord",
    "Fleet",
    "HomeError",
    "Kind",
    "MapIcon",
    "MapPolyline",
    "ParseError",
    "Registry",
    "RobotRecord",
    "RuleDef",
    "Runtime",
    "Scenario",
    "ScenarioRef",
    "ServerConfig",
    "ServerCore",
    "Status",
    "Tier",
    "TimeSpec",
    "evaluate",
    "expand",
    "load_fleet",
    "load_registry",
    "load_server_config",
    "manage",
    "parse_rule",
    "parse_scenario",
    "print_rule",
    "print_scenario",
    "save_registry",
    "validate",
    "__version__",
]
