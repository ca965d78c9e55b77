"""Client-side session handling and local caches.

The client keeps two caches that age independently: the device-data
cache (capability tables, refreshed rarely) and the info cache (status
and map, refreshed constantly).  A cached magic number lets commands
run without re-handshaking; when the server answers ERR EXPIRED the
client re-handshakes once and retries.

The state directory never stores the password — only the derived
credential digest that actually crosses the wire (hashed again with
each magic).
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field

from .errors import HomeError
from .netserver import request_over_socket
from .wire import (
    decrypt_magic,
    derive_digest,
    encode_request,
    hash_credentials,
)


@dataclass
class ClientConfig:
    host: str = "127.0.0.1"
    port: int = 8031
    sms_port: int = 8032
    special_code: str = "24680"
    shared_secret: str = "home-lab-secret"
    credential_salt: str = "home-lab-salt"
    username: str = "admin"
    password: str = ""
    phone: str = "+15550100"
    state_dir: str = "~/.smarthome"
    device_data_max_age: int = 86400
    info_max_age: int = 60


def load_client_config(path: str | None, overrides: dict | None = None) -> ClientConfig:
    data = {}
    if path:
        with open(os.path.expanduser(path), encoding="utf-8") as fh:
            data = json.load(fh)
    known = set(ClientConfig.__dataclass_fields__)
    kwargs = {k: v for k, v in data.items() if k in known}
    for key, value in (overrides or {}).items():
        if value is not None:
            kwargs[key] = value
    return ClientConfig(**kwargs)


class WireFailure(HomeError):
    """An ERR reply, kept with its payload lines."""

    def __init__(self, lines: list[str]):
        code = lines[0].removeprefix("ERR ").strip() if lines else "EMPTY"
        super().__init__(code, lines[1] if len(lines) > 1 else "")
        self.lines = lines


class Client:
    def __init__(self, cfg: ClientConfig):
        self.cfg = cfg
        self.state_dir = os.path.expanduser(cfg.state_dir)

    # -- state files --------------------------------------------------------

    def _path(self, name: str) -> str:
        return os.path.join(self.state_dir, name)

    def _read_json(self, name: str):
        try:
            with open(self._path(name), encoding="utf-8") as fh:
                return json.load(fh)
        except (OSError, ValueError):
            return None

    def _write_json(self, name: str, obj) -> None:
        os.makedirs(self.state_dir, exist_ok=True)
        with open(self._path(name), "w", encoding="utf-8") as fh:
            json.dump(obj, fh, indent=2)

    # -- transport ----------------------------------------------------------

    def send_line(self, line: str) -> list[str]:
        try:
            return request_over_socket(self.cfg.host, self.cfg.port, line)
        except OSError as exc:
            raise HomeError("CONNECT", f"{self.cfg.host}:{self.cfg.port}: {exc}") from None

    def send_sms(self, body: str) -> list[str]:
        line = f"SMS|{self.cfg.phone}|{body}"
        try:
            return request_over_socket(self.cfg.host, self.cfg.sms_port, line)
        except OSError as exc:
            raise HomeError("CONNECT", f"{self.cfg.host}:{self.cfg.sms_port}: {exc}") from None

    # -- auth -----------------------------------------------------------------

    def handshake(self) -> dict:
        lines = self.send_line(encode_request("auth.aspx", [("code", self.cfg.special_code)]))
        if not lines or lines[0] != "OK" or len(lines) < 3:
            raise WireFailure(lines)
        magic = decrypt_magic(self.cfg.shared_secret, lines[1], lines[2])
        state = self._read_json("state.json") or {}
        digest = state.get("digest")
        if not digest or state.get("user") != self.cfg.username:
            if not self.cfg.password:
                raise HomeError("AUTH", "no cached credentials; set a password in the config")
            digest = derive_digest(self.cfg.credential_salt, self.cfg.username, self.cfg.password)
        state = {"user": self.cfg.username, "digest": digest, "magic": magic,
                 "issued_at": int(time.time())}
        self._write_json("state.json", state)
        return state

    def _auth_params(self, state: dict) -> list[tuple[str, str]]:
        return [
            ("user", state["user"]),
            ("auth", hash_credentials(state["user"], state["digest"], state["magic"])),
        ]

    def request(self, page: str, params=(), retry: bool = True) -> list[str]:
        """Authenticated request; re-handshakes once on an expired magic."""
        state = self._read_json("state.json")
        if not state or "magic" not in state:
            state = self.handshake()
        lines = self.send_line(encode_request(page, self._auth_params(state) + list(params)))
        if lines and lines[0] == "ERR EXPIRED" and retry:
            state = self.handshake()
            lines = self.send_line(encode_request(page, self._auth_params(state) + list(params)))
        if not lines or lines[0] != "OK":
            raise WireFailure(lines)
        return lines[1:]

    def login(self) -> tuple[str, int]:
        self.handshake()
        payload = self.request("login.aspx")
        return payload[0], int(payload[1])

    # -- caches -----------------------------------------------------------------

    def update_devices(self) -> list[str]:
        lines = self.request("devices.aspx")
        self._write_json("devices-cache.json", {"fetched_at": int(time.time()), "lines": lines})
        return lines

    def update_info(self) -> list[str]:
        lines = self.request("map.aspx")
        self._write_json("info-cache.json", {"fetched_at": int(time.time()), "lines": lines})
        return lines

    def device_cache(self) -> dict | None:
        return self._read_json("devices-cache.json")

    def device_cache_age(self) -> float | None:
        cache = self.device_cache()
        if cache is None:
            return None
        return time.time() - cache["fetched_at"]

    def cached_device_lines(self) -> list[str]:
        """Capability lines from the cache, fetching once when absent."""
        cache = self.device_cache()
        if cache is None:
            return self.update_devices()
        return cache["lines"]
