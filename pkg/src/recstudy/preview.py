"""Resolution of recommended tracks to playable 30-second previews.

One search per track, exact (artist, title) matching after NFC + trim, and
the participant's market; tracks that cannot be resolved are discarded and
the ranked list is walked further to backfill.
"""

from __future__ import annotations

import logging
import re
import unicodedata
from dataclasses import dataclass
from typing import Sequence, Union

import requests

from .dataset import TrackKey
from .httputil import RateLimiter, TransportError, get_json

log = logging.getLogger(__name__)

PREVIEW_SECONDS = 30

_MARKET = re.compile(r"^[A-Z]{2}$")


class CatalogUnavailable(Exception):
    """Transport failure talking to the catalog; distinct from a discard."""


class UnsupportedMarket(Exception):
    """The catalog rejected the requested market code."""


@dataclass(frozen=True)
class CatalogApiConfig:
    base_url: str
    default_market: str = "US"
    case_fold: bool = False  # relax exact matching; off by default
    min_request_interval_ms: float = 0.0
    max_retries: int = 3
    backoff_base_s: float = 0.05


@dataclass(frozen=True)
class PreviewQuery:
    artist_name: str
    track_title: str
    market: str

    def __post_init__(self):
        if not self.artist_name or not self.track_title:
            raise ValueError("artist and title must be nonempty")
        if not _MARKET.match(self.market):
            raise ValueError(f"market must be 2 uppercase letters, got {self.market!r}")


@dataclass(frozen=True)
class PreviewResult:
    catalog_track_id: str
    preview_url: str
    artwork_url: str
    preview_duration: int
    embed_markup_ref: str

    def __post_init__(self):
        if self.preview_duration != PREVIEW_SECONDS:
            raise ValueError("previews are exactly 30 seconds")


@dataclass(frozen=True)
class Discarded:
    reason: str  # no-results | no-exact-match | no-preview-in-market


@dataclass(frozen=True)
class PresentationList:
    items: tuple[tuple[int, TrackKey, PreviewResult], ...]  # (rank in source, key, preview)
    requested_n: int
    discarded_count: int

    @property
    def shortfall(self) -> bool:
        return len(self.items) < self.requested_n


def _norm(text: str) -> str:
    return unicodedata.normalize("NFC", text).strip()


class PreviewResolver:
    """Stateless between calls; safe for concurrent use."""

    def __init__(self, cfg: CatalogApiConfig):
        self.cfg = cfg
        self._session = requests.Session()
        self._limiter = RateLimiter(cfg.min_request_interval_ms)

    def _search(self, q: PreviewQuery) -> list[dict]:
        try:
            status, body = get_json(
                self._session,
                f"{self.cfg.base_url.rstrip('/')}/search",
                params={"artist": q.artist_name, "title": q.track_title, "market": q.market},
                limiter=self._limiter,
                max_retries=self.cfg.max_retries,
                backoff_base=self.cfg.backoff_base_s,
            )
        except TransportError as exc:
            raise CatalogUnavailable(str(exc)) from exc
        if status == 400:
            raise UnsupportedMarket(q.market)
        if status != 200 or body is None or not isinstance(body.get("results"), list):
            raise CatalogUnavailable(f"search returned {status}")
        return body["results"]

    def resolve_preview(self, q: PreviewQuery) -> Union[PreviewResult, Discarded]:
        """One search; first result with an exact name match and a preview wins."""
        try:
            results = self._search(q)
        except UnsupportedMarket:
            if q.market == self.cfg.default_market:
                raise CatalogUnavailable(f"default market {q.market!r} unsupported")
            log.warning("market %s unsupported by catalog; falling back to %s",
                        q.market, self.cfg.default_market)
            return self.resolve_preview(
                PreviewQuery(q.artist_name, q.track_title, self.cfg.default_market)
            )
        if not results:
            return Discarded("no-results")
        want_artist, want_title = _norm(q.artist_name), _norm(q.track_title)
        if self.cfg.case_fold:
            want_artist, want_title = want_artist.casefold(), want_title.casefold()
        saw_exact = False
        for r in results:
            got_artist, got_title = _norm(r["artist"]), _norm(r["title"])
            if self.cfg.case_fold:
                got_artist, got_title = got_artist.casefold(), got_title.casefold()
            if (got_artist, got_title) != (want_artist, want_title):
                continue
            saw_exact = True
            if r.get("preview_url") and int(r.get("preview_seconds", 0)) == PREVIEW_SECONDS:
                return PreviewResult(
                    catalog_track_id=str(r["id"]),
                    preview_url=r["preview_url"],
                    artwork_url=r.get("artwork_url", ""),
                    preview_duration=PREVIEW_SECONDS,
                    embed_markup_ref=f"embed:track:{r['id']}",
                )
        return Discarded("no-preview-in-market" if saw_exact else "no-exact-match")

    def resolve_ranked_list(
        self, tracks: Sequence[TrackKey], market: str, n: int
    ) -> PresentationList:
        """Walk the ranked tracks in order until n resolve or the list ends.

        A miss at rank i pulls rank i+1 forward (backfill); survivor order
        is preserved and every miss is tallied.
        """
        if n < 0:
            raise ValueError("n must be >= 0")
        items: list[tuple[int, TrackKey, PreviewResult]] = []
        discarded = 0
        for rank, key in enumerate(tracks):
            if len(items) >= n:
                break
            outcome = self.resolve_preview(PreviewQuery(key.artist_name, key.track_title, market))
            if isinstance(outcome, Discarded):
                discarded += 1
                log.info("discarding %r - %r: %s", key.artist_name, key.track_title, outcome.reason)
                continue
            items.append((rank, key, outcome))
        return PresentationList(items=tuple(items), requested_n=n, discarded_count=discarded)


def resolve_preview(cfg: CatalogApiConfig, q: PreviewQuery) -> Union[PreviewResult, Discarded]:
    return PreviewResolver(cfg).resolve_preview(q)


def resolve_ranked_list(
    cfg: CatalogApiConfig, tracks: Sequence[TrackKey], market: str, n: int
) -> PresentationList:
    return PreviewResolver(cfg).resolve_ranked_list(tracks, market, n)
