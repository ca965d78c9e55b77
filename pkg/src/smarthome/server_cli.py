"""Entry point for the control server.

Loads the home description and server settings, optionally overlays a
persisted state file (scenarios, rules, users and allowed phones
survive restarts), then serves the socket, SMS and HTTP channels from
a single runtime loop until interrupted.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

from .fleet import load_fleet
from .netserver import HomeServer, utc_now
from .runtime import Runtime
from .store import load_registry, save_registry
from .wire import ServerConfig, ServerCore, load_server_config


def _default_home() -> str:
    from importlib import resources

    return str(resources.files("smarthome.data") / "demo_home.json")


def build_core(config: ServerConfig, home=None, start=None):
    """Assemble registry, fleet, runtime and request router."""
    source = home if home is not None else config.home
    reg, fleet = load_fleet(source or _default_home())
    if config.state_path and os.path.exists(config.state_path):
        saved = load_registry(config.state_path)
        for scn in saved.scenarios.values():
            reg.scenarios[scn.name] = scn
        for rule in saved.rules.values():
            reg.rules[rule.name] = rule
        reg.users.update(saved.users)
        reg.allowed_phones |= saved.allowed_phones
    reg.allowed_phones.update(config.allowed_phones)
    runtime = Runtime(reg, fleet, start or utc_now(), config.poll_seconds)
    core = ServerCore(reg, fleet, runtime, config)
    if config.state_path:
        core.persist = lambda: save_registry(reg, config.state_path)
    return core


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="smarthome-server",
        description="Scenario-based home control server.",
    )
    parser.add_argument("--config", required=True, help="server config file (JSON)")
    parser.add_argument("--home", help="home description file (overrides config)")
    parser.add_argument("--static", help="directory to serve over HTTP alongside the gateway")
    parser.add_argument("--port", type=int, help="request socket port (overrides config)")
    args = parser.parse_args(argv)

    config = load_server_config(args.config)
    core = build_core(config, home=args.home)
    server = HomeServer(core, wall_clock=True)
    server.start(
        config.host,
        args.port if args.port is not None else config.port,
        config.sms_port,
        config.http_port,
        static_dir=args.static,
    )
    print(f"request socket on {config.host}:{server.ports['request']}")
    print(f"sms socket     on {config.host}:{server.ports['sms']}")
    if "http" in server.ports:
        print(f"http gateway   on {config.host}:{server.ports['http']}")
    print("press Ctrl-C to stop")
    try:
        while True:
            time.sleep(1)
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return 0


if __name__ == "__main__":
    sys.exit(main())
