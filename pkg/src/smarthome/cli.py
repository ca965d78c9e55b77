"""Command-line client: every server feature from a terminal.

Exit codes: 0 success; 2 usage or connection problems; 3 rejected
credentials or installation code; 4 expired magic (after one retry);
5 validation failures; 6 not-implemented pages; 7 any other server
error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from urllib.parse import unquote

from .client import Client, ClientConfig, WireFailure, load_client_config
from .errors import HomeError
from .render import ascii_map, render_map_png, render_timeline_png, write_commands_csv
from .scenario import parse_scenario
from .wire import decode_devices, decode_map, encode_sms_scenario

_EXIT_CODES = {
    "CONNECT": 2,
    "AUTH": 3,
    "BADCODE": 3,
    "EXPIRED": 4,
    "VALIDATION": 5,
    "NOT_IMPLEMENTED": 6,
}


def _exit_code(code: str) -> int:
    return _EXIT_CODES.get(code, 7)


def _client(args) -> Client:
    overrides = {"state_dir": args.state}
    if args.server:
        host, _, port = args.server.partition(":")
        overrides["host"] = host or "127.0.0.1"
        if port:
            overrides["port"] = int(port)
    return Client(load_client_config(args.config, overrides))


def _emit(args, lines: list[str]) -> int:
    if args.json:
        print(json.dumps({"lines": lines}, indent=2))
    else:
        for line in lines:
            print(line)
    return 0


# -- commands ----------------------------------------------------------------

def cmd_login(args) -> int:
    user, remaining = _client(args).login()
    return _emit(args, [f"logged in as {user}, magic valid for {remaining} s"])


def cmd_update_devices(args) -> int:
    lines = _client(args).update_devices()
    return _emit(args, lines + [f"cached {len(lines)} capability lines"])


def cmd_update_info(args) -> int:
    lines = _client(args).update_info()
    return _emit(args, lines + [f"cached {len(lines)} map/status lines"])


def cmd_map(args) -> int:
    client = _client(args)
    lines = client.update_info()
    if args.ascii:
        walls, icons = decode_map(lines)
        print(ascii_map(walls, icons), end="")
        return 0
    if args.png:
        walls, icons = decode_map(lines)
        render_map_png(walls, icons, args.png)
        return _emit(args, [f"wrote {args.png}"])
    if args.json_map:
        walls, icons = decode_map(lines)
        print(json.dumps({
            "walls": [
                {"width": w.width, "rgb": list(w.rgb), "vertices": [list(v) for v in w.vertices]}
                for w in walls
            ],
            "icons": [
                {"oid": i.oid, "name": i.name, "pos": list(i.pos), "icon_id": i.icon_id}
                for i in icons
            ],
        }, indent=2))
        return 0
    return _emit(args, lines)


def cmd_status(args) -> int:
    client = _client(args)
    age = client.device_cache_age()
    if age is None:
        print("note: no device-data cache yet; run 'smarthome update-devices'", file=sys.stderr)
    elif age > client.cfg.device_data_max_age:
        print(
            f"warning: device data is {int(age)} s old "
            f"(limit {client.cfg.device_data_max_age} s); run 'smarthome update-devices'",
            file=sys.stderr,
        )
    params = [("oid", args.oid)] if args.oid else []
    lines = client.request("status.aspx", params)
    if args.json:
        return _emit(args, lines)
    for line in lines:
        if line.startswith("STAT|"):
            oid, icon_id, label = line.split("|")[1:4]
            print(f"{oid:>4}  {icon_id:<20} {unquote(label)}")
        else:
            print(line)
    return 0


def cmd_scenario(args) -> int:
    client = _client(args)
    if args.op == "list":
        lines = client.request("scenario.aspx", [("action", "list")])
        if args.json:
            return _emit(args, lines)
        for line in lines:
            _, name, enabled, text = line.split("|", 3)
            state = "enabled" if enabled == "1" else "disabled"
            print(f"{unquote(name)} [{state}]")
            for row in unquote(text).splitlines()[1:]:
                print(f"    {row}")
        return 0
    if args.op == "add":
        with open(args.name, encoding="utf-8") as fh:
            body = fh.read()
        lines = client.request("scenario.aspx", [("action", "add"), ("body", body)])
        return _emit(args, [f"stored scenario {lines[0]!r}"])
    if args.op == "activate":
        lines = client.request("scenario.aspx", [("action", "activate"), ("name", args.name)])
        _, ticket, scheduled = lines[0].split("|")
        return _emit(args, [f"activated: ticket {ticket}, {scheduled} commands scheduled"])
    client.request("scenario.aspx", [("action", args.op), ("name", args.name)])
    return _emit(args, [f"{args.op}d {args.name!r}"])


def cmd_rule(args) -> int:
    client = _client(args)
    if args.op == "list":
        lines = client.request("rule.aspx", [("action", "list")])
        if args.json:
            return _emit(args, lines)
        for line in lines:
            _, name, enabled, text = line.split("|", 3)
            state = "enabled" if enabled == "1" else "disabled"
            print(f"{unquote(name)} [{state}]: {unquote(text)}")
        return 0
    if args.op == "add":
        with open(args.file, encoding="utf-8") as fh:
            body = fh.read().strip()
        client.request("rule.aspx", [("action", "add"), ("name", args.name), ("body", body)])
        return _emit(args, [f"stored rule {args.name!r}"])
    client.request("rule.aspx", [("action", args.op), ("name", args.name)])
    return _emit(args, [f"{args.op}d {args.name!r}"])


def cmd_robots(args) -> int:
    lines = _client(args).request("robots.aspx", [("action", "list")])
    if args.json:
        return _emit(args, lines)
    for line in lines:
        parts = line.split("|")
        if parts[0] == "ROB":
            state = "enabled" if parts[3] == "1" else "DISABLED"
            print(f"R{parts[1]} {unquote(parts[2])} [{state}]")
            if parts[4]:
                print(f"    self: {parts[4]}")
            if parts[5]:
                print(f"    delegations: {parts[5]}")
        elif parts[0] == "RSTAT":
            print(f"R{parts[1]} at {unquote(parts[2])}: {unquote(parts[3])}"
                  f" ({parts[4]} queued)")
    return 0


def cmd_sms_send(args) -> int:
    client = _client(args)
    with open(args.file, encoding="utf-8") as fh:
        text = fh.read()
    reg = decode_devices(client.cached_device_lines())
    body = encode_sms_scenario(parse_scenario(text, reg), reg)
    reply = client.send_sms(body)
    if not reply or reply[0] != "OK":
        raise WireFailure(reply)
    return _emit(args, [f"sent {len(body)} chars", f"stored scenario {reply[1]!r}"])


def cmd_camera(args) -> int:
    try:
        _client(args).request("camera.aspx")
    except WireFailure as exc:
        if exc.code == "NOT_IMPLEMENTED":
            print("NOT_IMPLEMENTED: " + (exc.detail or "camera streaming"))
            return _exit_code(exc.code)
        raise
    return 0


def cmd_report(args) -> int:
    entries = []
    with open(args.trace, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                entries.append(json.loads(line))
    os.makedirs(args.out, exist_ok=True)
    outputs = []
    csv_path = os.path.join(args.out, "commands.csv")
    write_commands_csv(entries, csv_path)
    outputs.append(csv_path)
    timeline = os.path.join(args.out, "timeline.png")
    render_timeline_png(entries, timeline)
    outputs.append(timeline)
    if args.home:
        from .fleet import load_fleet

        reg, _ = load_fleet(args.home)
        map_path = os.path.join(args.out, "map.png")
        render_map_png(reg.map_walls, reg.map_icons, map_path)
        outputs.append(map_path)
    for e in entries:
        print("|".join([e["t"], e["actor"], e["verb"], e.get("param", ""), e["outcome"]]))
    for path in outputs:
        print(f"wrote {path}")
    return 0


# -- parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smarthome",
        description="Terminal client for the scenario-based home control server.",
    )
    parser.add_argument("--server", help="host:port of the request socket")
    parser.add_argument("--config", help="client config file (JSON)")
    parser.add_argument("--state", help="state/cache directory", default=None)
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("login", help="handshake and verify credentials").set_defaults(fn=cmd_login)
    sub.add_parser("update-devices", help="refresh the capability cache").set_defaults(
        fn=cmd_update_devices)
    sub.add_parser("update-info", help="refresh the status/map cache").set_defaults(
        fn=cmd_update_info)

    p = sub.add_parser("map", help="fetch the home map")
    p.add_argument("--ascii", action="store_true", help="render to the terminal")
    p.add_argument("--png", metavar="FILE", help="render to a PNG file")
    p.add_argument("--json-map", action="store_true", help="decoded map as JSON")
    p.set_defaults(fn=cmd_map)

    p = sub.add_parser("status", help="current device statuses")
    p.add_argument("oid", nargs="?", help="limit to one device")
    p.set_defaults(fn=cmd_status)

    p = sub.add_parser("scenario", help="list/add/enable/disable/activate scenarios")
    p.add_argument("op", choices=["list", "add", "enable", "disable", "activate"])
    p.add_argument("name", nargs="?", help="scenario name, or file for 'add'")
    p.set_defaults(fn=cmd_scenario)

    p = sub.add_parser("rule", help="list/add/enable/disable rules")
    p.add_argument("op", choices=["list", "add", "enable", "disable"])
    p.add_argument("name", nargs="?", help="rule name")
    p.add_argument("file", nargs="?", help="rule text file for 'add'")
    p.set_defaults(fn=cmd_rule)

    sub.add_parser("robots", help="robot capabilities and state").set_defaults(fn=cmd_robots)

    p = sub.add_parser("sms-send", help="send a scenario file over the SMS channel")
    p.add_argument("file")
    p.set_defaults(fn=cmd_sms_send)

    sub.add_parser("camera", help="camera feed (not implemented)").set_defaults(fn=cmd_camera)

    p = sub.add_parser("report", help="render a dispatch trace to figures and CSV")
    p.add_argument("--trace", required=True, help="trace.jsonl file")
    p.add_argument("--home", help="home config for the map figure")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command in ("scenario", "rule") and args.op != "list" and not args.name:
        print(f"{args.command} {args.op} needs a name argument", file=sys.stderr)
        return 2
    if args.command == "rule" and args.op == "add" and not args.file:
        print("rule add needs a file argument", file=sys.stderr)
        return 2
    try:
        return args.fn(args)
    except WireFailure as exc:
        for line in exc.lines:
            print(line, file=sys.stderr)
        return _exit_code(exc.code)
    except HomeError as exc:
        print(str(exc), file=sys.stderr)
        return _exit_code(exc.code)
    except OSError as exc:
        print(str(exc), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
