"""HTTP plumbing shared by the scrobble and catalog clients."""

from __future__ import annotations

import threading
import time
from typing import Optional

import requests


class TransportError(Exception):
    """Transient transport failure that survived every retry."""


class RateLimiter:
    """Spaces request releases at least min_interval apart across all threads.

    The next release time is measured from when the previous caller actually
    got through, not from a pre-booked slot, so sleep overshoot can never
    compress the gap below the interval.  Callers queue on the lock; that
    serialization is the point of a rate limiter.
    """

    def __init__(self, min_interval_ms: float):
        self._interval = max(0.0, min_interval_ms) / 1000.0
        self._lock = threading.Lock()
        self._not_before = 0.0

    def wait(self) -> None:
        if self._interval == 0.0:
            return
        with self._lock:
            now = time.monotonic()
            delay = self._not_before - now
            while delay > 0:
                time.sleep(delay)
                now = time.monotonic()
                delay = self._not_before - now
            self._not_before = now + self._interval


def get_json(
    session: requests.Session,
    url: str,
    *,
    params: Optional[dict] = None,
    limiter: Optional[RateLimiter] = None,
    max_retries: int = 3,
    backoff_base: float = 0.05,
    timeout: float = 30.0,
) -> tuple[int, Optional[dict]]:
    """GET with rate limiting and exponential backoff on transient failures.

    Connection errors and 5xx/429 responses are retried up to max_retries;
    a 429 that survives the retries is returned to the caller (each client
    maps it to its own error type), anything else transient raises
    TransportError.  Returns (status, parsed JSON or None if unparseable).
    """
    attempt = 0
    while True:
        if limiter is not None:
            limiter.wait()
        try:
            resp = session.get(url, params=params, timeout=timeout)
        except requests.RequestException as exc:
            if attempt >= max_retries:
                raise TransportError(f"GET {url}: {exc}") from exc
            time.sleep(backoff_base * (2**attempt))
            attempt += 1
            continue
        if resp.status_code >= 500 or resp.status_code == 429:
            if attempt >= max_retries:
                if resp.status_code == 429:
                    return resp.status_code, None
                raise TransportError(f"GET {url}: HTTP {resp.status_code} after {attempt} retries")
            time.sleep(backoff_base * (2**attempt))
            attempt += 1
            continue
        try:
            return resp.status_code, resp.json()
        except ValueError:
            return resp.status_code, None
