"""Shared scaffolding for the in-process mock HTTP servers."""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional
from urllib.parse import parse_qs, urlparse


@dataclass(frozen=True)
class RequestRecord:
    monotonic_time: float
    path: str


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"  # keep-alive keeps arrival-time jitter low

    def do_GET(self):  # noqa: N802 - http.server naming
        mock = self.server.mock  # type: ignore[attr-defined]
        parsed = urlparse(self.path)
        query = {k: v[0] for k, v in parse_qs(parsed.query).items()}
        mock._record(self.path)
        forced = mock._pop_forced_status()
        if forced is not None:
            status, body = forced, {"error": f"injected {forced}"}
        else:
            status, body = mock.handle(parsed.path, query)
        payload = json.dumps(body).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, fmt, *args):  # keep test output quiet
        pass


class MockHttpServer:
    """Deterministic localhost JSON server run on a daemon thread.

    Subclasses implement handle(path, query) -> (status, body).  Every
    request is appended to request_log with a monotonic timestamp so tests
    can assert on rate-limit spacing; fail_next() injects error statuses
    ahead of normal handling.
    """

    def __init__(self):
        self._httpd: Optional[ThreadingHTTPServer] = None
        self._thread: Optional[threading.Thread] = None
        self._lock = threading.Lock()
        self._forced: list[int] = []
        self.request_log: list[RequestRecord] = []

    def handle(self, path: str, query: dict) -> tuple[int, dict]:
        raise NotImplementedError

    def _record(self, path: str) -> None:
        with self._lock:
            self.request_log.append(RequestRecord(time.monotonic(), path))

    def _pop_forced_status(self) -> Optional[int]:
        with self._lock:
            return self._forced.pop(0) if self._forced else None

    def fail_next(self, status: int, times: int = 1) -> None:
        with self._lock:
            self._forced.extend([status] * times)

    def clear_failures(self) -> None:
        with self._lock:
            self._forced.clear()

    def start(self, port: int = 0) -> "MockHttpServer":
        self._httpd = ThreadingHTTPServer(("127.0.0.1", port), _Handler)
        self._httpd.mock = self  # type: ignore[attr-defined]
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self, port: int) -> None:
        self.start(port)
        assert self._thread is not None
        self._thread.join()

    def stop(self) -> None:
        if self._httpd is not None:
            self._httpd.shutdown()
            self._httpd.server_close()
            self._httpd = None

    @property
    def base_url(self) -> str:
        assert self._httpd is not None, "server not started"
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


def paginate(items: list, page: int, per_page: int) -> tuple[list, int, int]:
    """Slice items for a 1-based page; returns (slice, total, total_pages)."""
    total = len(items)
    total_pages = (total + per_page - 1) // per_page
    start = (page - 1) * per_page
    return items[start : start + per_page], total, total_pages
