"""Network front ends: line-protocol sockets and an HTTP gateway.

Three listeners share one ServerCore:

* request socket — one `<page>?<query>` line per request, answered
  with response lines and a terminating blank line;
* SMS socket — `SMS|<sender>|<body>` lines, same reply framing;
* HTTP gateway — `GET /<page>?<query>` returns the identical payload
  lines as text/plain, and anything not ending in `.aspx` is served
  from a static directory so the web client needs no second origin.

All handler threads funnel work through a queue to the single loop
thread that owns the runtime, so the core never sees concurrency.  In
wall-clock mode the loop also advances the virtual clock to track real
time between requests.
"""

from __future__ import annotations

import mimetypes
import queue
import socket
import socketserver
import threading
import time
from datetime import datetime, timedelta, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .wire import ServerCore


class _Request:
    def __init__(self, kind: str, payload):
        self.kind = kind
        self.payload = payload
        self.reply: queue.Queue = queue.Queue(maxsize=1)


class HomeServer:
    """Owns the loop thread; listeners are started on demand."""

    def __init__(self, core: ServerCore, wall_clock: bool = True):
        self.core = core
        self.wall_clock = wall_clock
        self.requests: queue.Queue = queue.Queue()
        self.ports: dict[str, int] = {}
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._servers: list = []
        self._wall_anchor = time.monotonic()

    # -- request funnel -----------------------------------------------------

    def submit(self, kind: str, payload) -> list[str]:
        req = _Request(kind, payload)
        self.requests.put(req)
        return req.reply.get()

    def _serve_one(self, req: _Request) -> None:
        try:
            if req.kind == "line":
                lines = self.core.handle_line(req.payload)
            else:
                sender, body = req.payload
                lines = self.core.handle_sms(sender, body, self.core.runtime.now)
        except Exception as exc:  # the loop thread must survive anything
            lines = ["ERR INTERNAL", repr(exc)]
        req.reply.put(lines)

    def _loop(self) -> None:
        while not self._stop.is_set():
            if self.wall_clock:
                elapsed = int(time.monotonic() - self._wall_anchor)
                target = self.core.runtime.start + timedelta(seconds=elapsed)
                if target > self.core.runtime.now:
                    self.core.runtime.tick(target)
            try:
                req = self.requests.get(timeout=0.05)
            except queue.Empty:
                continue
            self._serve_one(req)

    # -- listeners ------------------------------------------------------------

    def start(self, host: str = "127.0.0.1", port: int = 0, sms_port: int | None = 0,
              http_port: int | None = None, static_dir: str | None = None) -> None:
        self._wall_anchor = time.monotonic()
        loop = threading.Thread(target=self._loop, name="home-loop", daemon=True)
        loop.start()
        self._threads.append(loop)
        self._start_stream(host, port, "request")
        if sms_port is not None:
            self._start_stream(host, sms_port, "sms")
        if http_port is not None:
            self._start_http(host, http_port, static_dir)

    def _start_stream(self, host: str, port: int, kind: str) -> None:
        outer = self

        class Handler(socketserver.StreamRequestHandler):
            def handle(self):
                while True:
                    raw = self.rfile.readline()
                    if not raw:
                        return
                    text = raw.decode("utf-8", "replace").strip()
                    if not text:
                        continue
                    if kind == "sms":
                        parts = text.split("|", 2)
                        if len(parts) != 3 or parts[0] != "SMS":
                            lines = ["ERR MALFORMED_REQUEST", "expected SMS|<sender>|<body>"]
                        else:
                            lines = outer.submit("sms", (parts[1], parts[2]))
                    else:
                        lines = outer.submit("line", text)
                    self.wfile.write(("\n".join(lines) + "\n\n").encode())

        server = socketserver.ThreadingTCPServer((host, port), Handler, bind_and_activate=False)
        server.daemon_threads = True
        server.allow_reuse_address = True
        server.server_bind()
        server.server_activate()
        self.ports[kind] = server.server_address[1]
        self._servers.append(server)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        self._threads.append(thread)

    def _start_http(self, host: str, port: int, static_dir: str | None) -> None:
        outer = self
        root = Path(static_dir).resolve() if static_dir else None

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):  # keep test output clean
                pass

            def do_GET(self):
                path, _, query = self.path.partition("?")
                page = path.lstrip("/")
                if page.endswith(".aspx"):
                    lines = outer.submit("line", f"{page}?{query}" if query else page)
                    body = ("\n".join(lines) + "\n").encode()
                    self.send_response(200)
                    self.send_header("Content-Type", "text/plain; charset=utf-8")
                    self.send_header("Content-Length", str(len(body)))
                    self.end_headers()
                    self.wfile.write(body)
                    return
                self._static(page or "index.html")

            def _static(self, name: str):
                if root is None:
                    self.send_error(404)
                    return
                target = (root / name).resolve()
                if not str(target).startswith(str(root)) or not target.is_file():
                    self.send_error(404)
                    return
                body = target.read_bytes()
                ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
                self.send_response(200)
                self.send_header("Content-Type", ctype)
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

        server = ThreadingHTTPServer((host, port), Handler)
        server.daemon_threads = True
        self.ports["http"] = server.server_address[1]
        self._servers.append(server)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        self._threads.append(thread)

    def stop(self) -> None:
        self._stop.set()
        for server in self._servers:
            server.shutdown()
            server.server_close()
        for thread in self._threads:
            thread.join(timeout=2)


def request_over_socket(host: str, port: int, line: str, timeout: float = 5.0) -> list[str]:
    """One request/response exchange; clients and tests share this."""
    with socket.create_connection((host, port), timeout=timeout) as sock:
        sock.sendall(line.encode() + b"\n")
        data = b""
        while not data.endswith(b"\n\n"):
            chunk = sock.recv(4096)
            if not chunk:
                break
            data += chunk
    return data.decode().strip("\n").split("\n") if data.strip() else []


def utc_now() -> datetime:
    return datetime.now(timezone.utc).replace(microsecond=0)
