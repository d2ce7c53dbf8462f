"""Background participant pipeline: eligibility, collection, scoring, previews.

Request handlers never run any of this inline; the whole pipeline executes
on the IO worker pool, with the CPU-bound scoring step handed to the small
CPU pool.  Trained models are loaded once at startup and shared read-only.
"""

from __future__ import annotations

import itertools
import logging
import threading
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from ..dataset import ListeningEvent, TrackKey
from ..models import MfModel, MultVaeModel, load_model, mf_fold_in, mf_scores, multvae_scores, recommend_top_n
from ..preview import CatalogUnavailable, PreviewResolver
from ..scrobble import PrivateAccount, ScrobbleClient, UserNotFound

log = logging.getLogger(__name__)

Model = Union[MfModel, MultVaeModel]


@dataclass
class LoadedModel:
    name: str
    model: Model
    track_to_index: dict[TrackKey, int]
    index_to_track: tuple[TrackKey, ...]


class ModelRegistry:
    """Holds the shared immutable models; counts loads for instrumentation."""

    def __init__(self):
        self.models: list[LoadedModel] = []
        self.load_count = 0
        self._rr = itertools.cycle([])
        self._lock = threading.Lock()

    def load_all(self, paths: list[str]) -> None:
        for i, path in enumerate(paths):
            model = load_model(path)
            self.load_count += 1
            if model.item_catalog is None:
                raise ValueError(f"{path}: model has no item catalog; cannot serve unseen users")
            catalog = tuple(TrackKey(a, t) for a, t in model.item_catalog)
            kind = "mf" if isinstance(model, MfModel) else "multvae"
            self.models.append(
                LoadedModel(
                    name=f"{kind}:{Path(path).stem}:{i}",
                    model=model,
                    track_to_index={key: idx for idx, key in enumerate(catalog)},
                    index_to_track=catalog,
                )
            )
        self._rr = itertools.cycle(range(len(self.models)))

    def assign(self, policy: str) -> LoadedModel:
        if not self.models:
            raise RuntimeError("no models loaded")
        if policy == "round-robin":
            with self._lock:
                return self.models[next(self._rr)]
        return self.models[0]


def score_history(loaded: LoadedModel, events: list[ListeningEvent]) -> tuple[np.ndarray, list[int]]:
    """Item scores for a fresh user plus the catalog indices of their history.

    Tracks outside the model's catalog are ignored; they cannot be scored
    or recommended anyway.
    """
    counts = Counter(ev.track for ev in events)
    indices, values = [], []
    for key, count in counts.items():
        idx = loaded.track_to_index.get(key)
        if idx is not None:
            indices.append(idx)
            values.append(float(count))
    if isinstance(loaded.model, MfModel):
        factor = mf_fold_in(loaded.model, indices, values)
        return mf_scores(loaded.model, factor), indices
    x = np.zeros(loaded.model.n_items)
    if indices:
        x[np.array(indices)] = 1.0
    return multvae_scores(loaded.model, x), indices


def rank_candidates(loaded: LoadedModel, events: list[ListeningEvent], depth: int) -> list[TrackKey]:
    scores, history = score_history(loaded, events)
    ranked = recommend_top_n(scores, history, min(depth, len(scores)))
    return [loaded.index_to_track[i] for i in ranked.indices()]


class ParticipantPipeline:
    """Runs the per-session job; constructed once with the shared services."""

    def __init__(self, *, store, response_log, registry, scrobble: ScrobbleClient,
                 resolver: PreviewResolver, config, cpu_pool, apply_event, shutdown_event=None):
        self.store = store
        self.response_log = response_log
        self.registry = registry
        self.scrobble = scrobble
        self.resolver = resolver
        self.config = config
        self.cpu_pool = cpu_pool
        self.apply_event = apply_event  # callback: (session_id, event, **payload)
        self.shutdown_event = shutdown_event or threading.Event()

    def run(self, session_id: str, market: Optional[str]) -> None:
        handle = self.store.job(session_id)
        try:
            session = self.store.get(session_id)
            username = session.username
            eligibility = self.scrobble.check_eligibility(username, self.config.eligibility_threshold)
            if not eligibility.eligible:
                self._fail(session_id, eligibility.reason or "ineligible")
                return
            events = self.scrobble.fetch_user_history(
                username,
                page_callback=lambda page, total: handle.advance("Collecting", page / total),
            )
            self.apply_event(session_id, "collection_done")
            handle.advance("Recommending", 0.0)
            loaded = next(
                m for m in self.registry.models if m.name == session.model_name
            )
            ranked = self.cpu_pool.submit(
                rank_candidates, loaded, events, self.config.candidate_depth
            ).result()
            handle.advance("Recommending", 0.5)
            plist = self.resolver.resolve_ranked_list(
                ranked, market or self.config.default_market, self.config.list_length
            )
            self.apply_event(session_id, "recommendation_done", items=plist)
            handle.advance("Recommending", 1.0)
        except UserNotFound:
            self._fail(session_id, "user-not-found")
        except PrivateAccount:
            self._fail(session_id, "private-account")
        except CatalogUnavailable:
            self._fail(session_id, "catalog-unavailable")
        except Exception:
            if self.shutdown_event.is_set():
                log.info("abandoning pipeline for session %s: service shutting down", session_id)
                return
            log.exception("pipeline failed for session %s", session_id)
            self._fail(session_id, "internal")

    def _fail(self, session_id: str, reason: str) -> None:
        handle = self.store.job(session_id)
        if handle is not None:
            handle.error = reason
        try:
            self.apply_event(session_id, "failure", reason=reason)
        except Exception:
            log.exception("could not record failure for session %s", session_id)
