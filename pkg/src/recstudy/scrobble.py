"""Client for a scrobble-service HTTP API: histories, friends crawl, eligibility.

The wire shape is a generic scrobble API (JSON pagination envelopes keyed by
username); an adapter for any real vendor is a thin mapping layer on top.
All tests run against the deterministic mock server in recstudy.mocks.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import requests

from .dataset import ListeningEvent
from .httputil import RateLimiter, get_json

log = logging.getLogger(__name__)


class ScrobbleError(Exception):
    pass


class UserNotFound(ScrobbleError):
    pass


class PrivateAccount(ScrobbleError):
    pass


class RateLimited(ScrobbleError):
    """Server kept answering 429 after every retry."""


class MalformedPage(ScrobbleError):
    def __init__(self, page: int, reason: str):
        super().__init__(f"page {page}: {reason}")
        self.page = page


@dataclass(frozen=True)
class ScrobbleApiConfig:
    base_url: str
    api_key: Optional[str] = None
    page_size: int = 200
    min_request_interval_ms: float = 0.0
    max_retries: int = 3
    backoff_base_s: float = 0.05

    def __post_init__(self):
        if not 1 <= self.page_size <= 500:
            raise ValueError("page_size must be in 1..=500")
        if self.min_request_interval_ms < 0:
            raise ValueError("min_request_interval_ms must be >= 0")


@dataclass(frozen=True)
class CrawlPlan:
    seed_usernames: Sequence[str]
    target_user_count: int
    rng_seed: int = 0
    max_friends_per_user: int = 100

    def __post_init__(self):
        object.__setattr__(self, "seed_usernames", tuple(self.seed_usernames))
        if not self.seed_usernames:
            raise ValueError("need at least one seed username")
        if self.target_user_count < 1:
            raise ValueError("target_user_count must be >= 1")


@dataclass(frozen=True)
class CrawlResult:
    usernames: tuple[str, ...]
    exhausted: bool
    skipped: int


@dataclass(frozen=True)
class EligibilityResult:
    username: str
    event_count: int
    threshold: int
    eligible: bool
    reason: Optional[str] = None


class ScrobbleClient:
    """One instance may serve concurrent calls; the rate limiter is shared
    across all of them so the min-interval contract holds instance-wide."""

    def __init__(self, cfg: ScrobbleApiConfig):
        self.cfg = cfg
        self._session = requests.Session()
        if cfg.api_key:
            self._session.params = {"api_key": cfg.api_key}
        self._limiter = RateLimiter(cfg.min_request_interval_ms)

    def _get(self, path: str, params: Optional[dict] = None) -> tuple[int, Optional[dict]]:
        return get_json(
            self._session,
            f"{self.cfg.base_url.rstrip('/')}{path}",
            params=params,
            limiter=self._limiter,
            max_retries=self.cfg.max_retries,
            backoff_base=self.cfg.backoff_base_s,
        )

    def _check_user_errors(self, status: int, username: str) -> None:
        if status == 404:
            raise UserNotFound(username)
        if status == 403:
            raise PrivateAccount(username)
        if status == 429:
            raise RateLimited(username)

    def fetch_user_history(
        self,
        username: str,
        since: Optional[float] = None,
        page_callback: Callable[[int, int], None] | None = None,
    ) -> list[ListeningEvent]:
        """All of a user's listening events, paginated in API order.

        Events strictly older than `since` are excluded.  page_callback
        receives (pages fetched, total pages) after each page, which the
        study service uses for progress reporting.
        """
        if not username:
            raise ValueError("username must be nonempty")
        events: list[ListeningEvent] = []
        page, total_pages = 1, 1
        while page <= total_pages:
            status, body = self._get(
                f"/users/{username}/events",
                params={"page": page, "per_page": self.cfg.page_size},
            )
            self._check_user_errors(status, username)
            if body is None or not isinstance(body.get("events"), list):
                raise MalformedPage(page, "missing events list")
            try:
                total_pages = int(body["total_pages"])
                for entry in body["events"]:
                    ts = float(entry["timestamp"])
                    if since is not None and ts < since:
                        continue
                    events.append(ListeningEvent(username, entry["artist"], entry["title"], ts))
            except (KeyError, TypeError, ValueError) as exc:
                raise MalformedPage(page, str(exc)) from exc
            if page_callback is not None:
                page_callback(page, max(total_pages, 1))
            page += 1
        return events

    def fetch_friends(self, username: str, max_friends: int) -> list[str]:
        """Up to max_friends usernames from the user's friends list."""
        friends: list[str] = []
        page, total_pages = 1, 1
        while page <= total_pages and len(friends) < max_friends:
            status, body = self._get(f"/users/{username}/friends", params={"page": page})
            self._check_user_errors(status, username)
            if body is None or not isinstance(body.get("users"), list):
                raise MalformedPage(page, "missing users list")
            total_pages = int(body.get("total_pages", 1))
            friends.extend(str(u) for u in body["users"])
            page += 1
        return friends[:max_friends]

    def crawl_social_graph(self, plan: CrawlPlan) -> CrawlResult:
        """Seeded-random breadth-first crawl of the public friends graph.

        Seeds are always included (an unknown seed propagates UserNotFound);
        discovered friends whose friends list cannot be read are skipped.
        Stops at target_user_count or when the reachable graph is exhausted.
        """
        rng = np.random.default_rng(plan.rng_seed)
        result: list[str] = []
        frontier: list[str] = []
        seen: set[str] = set(plan.seed_usernames)
        skipped = 0

        def expand(username: str) -> None:
            for friend in self.fetch_friends(username, plan.max_friends_per_user):
                if friend not in seen:
                    seen.add(friend)
                    frontier.append(friend)

        for seed in plan.seed_usernames:
            if len(result) >= plan.target_user_count:
                break
            try:
                expand(seed)
            except UserNotFound:
                raise
            except PrivateAccount:
                log.warning("seed %s is private; including without expansion", seed)
            result.append(seed)
        while len(result) < plan.target_user_count and frontier:
            pick = frontier.pop(int(rng.integers(len(frontier))))
            try:
                expand(pick)
            except (UserNotFound, PrivateAccount):
                skipped += 1
                continue
            result.append(pick)
        return CrawlResult(
            usernames=tuple(result),
            exhausted=len(result) < plan.target_user_count,
            skipped=skipped,
        )

    def check_eligibility(self, username: str, threshold: int) -> EligibilityResult:
        """Eligibility from the account's total event count alone.

        Never fetches the full history; a private account is ineligible
        with a reason rather than an error so the study flow can degrade
        gracefully.
        """
        if threshold < 0:
            raise ValueError("threshold must be >= 0")
        status, body = self._get(f"/users/{username}")
        self._check_user_errors(status, username)
        if body is None or "event_count" not in body:
            raise MalformedPage(1, "missing event_count")
        count = int(body["event_count"])
        if not body.get("public", True):
            return EligibilityResult(username, count, threshold, eligible=False, reason="private-account")
        return EligibilityResult(username, count, threshold, eligible=count >= threshold)


def fetch_user_history(cfg: ScrobbleApiConfig, username: str, since: Optional[float] = None):
    return ScrobbleClient(cfg).fetch_user_history(username, since)


def crawl_social_graph(cfg: ScrobbleApiConfig, plan: CrawlPlan) -> CrawlResult:
    return ScrobbleClient(cfg).crawl_social_graph(plan)


def check_eligibility(cfg: ScrobbleApiConfig, username: str, threshold: int) -> EligibilityResult:
    return ScrobbleClient(cfg).check_eligibility(username, threshold)
