"""Listening-event data pipeline: ingestion, filtering, matrices, splits, top-ups.

Everything here is immutable after construction and safe to share across
threads; the operations are pure functions of their inputs.
"""

from __future__ import annotations

import unicodedata
from collections import Counter
from dataclasses import dataclass
from typing import Iterable

import numpy as np
import scipy.sparse as sp


def _clean(text: str) -> str:
    """NFC-normalize and trim surrounding whitespace."""
    return unicodedata.normalize("NFC", text).strip()


class TooManyMalformed(Exception):
    """More than half of the ingested records failed to parse."""


@dataclass(frozen=True)
class TrackKey:
    """Track identity: exact (artist, title) after NFC normalization and trim.

    Case-sensitive on purpose — preview lookup later requires the exact
    names, so the pipeline must not fold case anywhere.
    """

    artist_name: str
    track_title: str

    def __post_init__(self):
        object.__setattr__(self, "artist_name", _clean(self.artist_name))
        object.__setattr__(self, "track_title", _clean(self.track_title))


@dataclass(frozen=True)
class ListeningEvent:
    """One recorded play: (user, artist, title) at a unix timestamp."""

    user_id: str
    artist_name: str
    track_title: str
    timestamp: float

    def __post_init__(self):
        object.__setattr__(self, "artist_name", _clean(self.artist_name))
        object.__setattr__(self, "track_title", _clean(self.track_title))
        if not self.user_id:
            raise ValueError("empty user_id")
        if not self.artist_name:
            raise ValueError("empty artist name")
        if not self.track_title:
            raise ValueError("empty track title")
        ts = self.timestamp
        if not np.isfinite(ts) or ts < 0:
            raise ValueError(f"bad timestamp {ts!r}")
        # store integral timestamps as int so round-trips stay exact
        if isinstance(ts, float) and ts.is_integer():
            object.__setattr__(self, "timestamp", int(ts))

    @property
    def track(self) -> TrackKey:
        return TrackKey(self.artist_name, self.track_title)


@dataclass(frozen=True)
class MalformedRecord:
    line_no: int
    reason: str


@dataclass(frozen=True)
class IngestReport:
    total_records: int
    accepted: int
    duplicates_collapsed: int
    malformed: tuple[MalformedRecord, ...]


@dataclass(frozen=True)
class Dataset:
    """Deduplicated listening events plus dense user/track indices."""

    events: tuple[ListeningEvent, ...]
    user_index: dict[str, int]
    track_index: dict[TrackKey, int]

    @property
    def n_users(self) -> int:
        return len(self.user_index)

    @property
    def n_tracks(self) -> int:
        return len(self.track_index)

    @property
    def n_events(self) -> int:
        return len(self.events)

    @classmethod
    def from_events(cls, events: Iterable[ListeningEvent]) -> "Dataset":
        """Collapse exact duplicates and index users/tracks by first appearance."""
        seen: set[ListeningEvent] = set()
        kept: list[ListeningEvent] = []
        for ev in events:
            if ev not in seen:
                seen.add(ev)
                kept.append(ev)
        user_index: dict[str, int] = {}
        track_index: dict[TrackKey, int] = {}
        for ev in kept:
            if ev.user_id not in user_index:
                user_index[ev.user_id] = len(user_index)
            key = ev.track
            if key not in track_index:
                track_index[key] = len(track_index)
        return cls(events=tuple(kept), user_index=user_index, track_index=track_index)


def ingest_events(records: Iterable) -> tuple[Dataset, IngestReport]:
    """Parse raw event records into a deduplicated Dataset.

    Each record is either a tab-separated line (user, artist, title,
    timestamp) or an already-split sequence of those four fields.  Lines
    starting with '#' and blank lines are skipped.  Malformed records are
    collected into the report; ingestion only fails outright when more
    than half of the records are malformed.
    """
    events: list[ListeningEvent] = []
    malformed: list[MalformedRecord] = []
    total = 0
    for line_no, record in enumerate(records, start=1):
        if isinstance(record, str):
            stripped = record.strip("\n\r")
            if not stripped.strip() or stripped.lstrip().startswith("#"):
                continue
            fields = stripped.split("\t")
        else:
            fields = list(record)
        total += 1
        if len(fields) != 4:
            malformed.append(MalformedRecord(line_no, f"expected 4 fields, got {len(fields)}"))
            continue
        user_id, artist, title, ts_raw = fields
        try:
            ts = float(ts_raw)
        except (TypeError, ValueError):
            malformed.append(MalformedRecord(line_no, f"bad timestamp {ts_raw!r}"))
            continue
        try:
            events.append(ListeningEvent(str(user_id).strip(), artist, title, ts))
        except ValueError as exc:
            malformed.append(MalformedRecord(line_no, str(exc)))
    if total > 0 and len(malformed) * 2 > total:
        raise TooManyMalformed(
            f"{len(malformed)} of {total} records malformed; first: {malformed[0].reason}"
        )
    ds = Dataset.from_events(events)
    report = IngestReport(
        total_records=total,
        accepted=len(events),
        duplicates_collapsed=len(events) - ds.n_events,
        malformed=tuple(malformed),
    )
    return ds, report


def read_events_file(path) -> tuple[Dataset, IngestReport]:
    """Ingest a UTF-8 tab-separated events file (no header, '#' comments)."""
    with open(path, encoding="utf-8") as fh:
        return ingest_events(fh)


def write_events_file(ds: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ev in ds.events:
            fh.write(f"{ev.user_id}\t{ev.artist_name}\t{ev.track_title}\t{ev.timestamp}\n")


def _reduction_pct(before: int, after: int) -> float:
    return 100.0 * (1.0 - after / before) if before > 0 else 0.0


@dataclass(frozen=True)
class FilterReport:
    min_le: int
    tracks_before: int
    tracks_after: int
    events_before: int
    events_after: int
    track_reduction_pct: float
    event_reduction_pct: float


def filter_min_interactions(ds: Dataset, min_le: int) -> tuple[Dataset, FilterReport]:
    """Drop every track with min_le or fewer events ("10 or fewer" is inclusive).

    Users left with zero events disappear from the user index as a
    consequence.  Returns the filtered dataset and a report with the
    track/event reduction percentages.
    """
    if min_le < 0:
        raise ValueError("min_le must be >= 0")
    counts = Counter(ev.track for ev in ds.events)
    kept_events = [ev for ev in ds.events if counts[ev.track] > min_le]
    filtered = Dataset.from_events(kept_events)
    report = FilterReport(
        min_le=min_le,
        tracks_before=ds.n_tracks,
        tracks_after=filtered.n_tracks,
        events_before=ds.n_events,
        events_after=filtered.n_events,
        track_reduction_pct=_reduction_pct(ds.n_tracks, filtered.n_tracks),
        event_reduction_pct=_reduction_pct(ds.n_events, filtered.n_events),
    )
    return filtered, report


@dataclass(frozen=True)
class InteractionMatrix:
    """Sparse user x track matrix of listening counts (or 0/1 if binarized)."""

    n_users: int
    n_items: int
    matrix: sp.csr_matrix
    binarized: bool

    def user_row(self, user: int) -> np.ndarray:
        """Dense copy of one user's row."""
        return np.asarray(self.matrix.getrow(user).todense()).ravel()

    def user_items(self, user: int) -> np.ndarray:
        """Item indices the user has interacted with."""
        return self.matrix.indices[self.matrix.indptr[user] : self.matrix.indptr[user + 1]]

    @property
    def nnz(self) -> int:
        return self.matrix.nnz


def build_interaction_matrix(ds: Dataset, binarize: bool = False) -> InteractionMatrix:
    """Aggregate events into per-(user, track) counts, optionally binarized."""
    rows = np.fromiter((ds.user_index[ev.user_id] for ev in ds.events), dtype=np.int64, count=ds.n_events)
    cols = np.fromiter((ds.track_index[ev.track] for ev in ds.events), dtype=np.int64, count=ds.n_events)
    data = np.ones(ds.n_events, dtype=np.float64)
    mat = sp.coo_matrix((data, (rows, cols)), shape=(ds.n_users, ds.n_tracks)).tocsr()
    mat.sum_duplicates()
    if binarize:
        mat.data[:] = 1.0
    return InteractionMatrix(n_users=ds.n_users, n_items=ds.n_tracks, matrix=mat, binarized=binarize)


def build_matrix_against_index(
    ds: Dataset, track_index: dict[TrackKey, int], binarize: bool = True
) -> InteractionMatrix:
    """Interaction matrix in an externally fixed item space.

    Events whose track is not in track_index are dropped; used to line a
    fresh dataset up with a trained model's catalog.
    """
    n_items = len(track_index)
    rows, cols = [], []
    for ev in ds.events:
        idx = track_index.get(ev.track)
        if idx is not None:
            rows.append(ds.user_index[ev.user_id])
            cols.append(idx)
    mat = sp.coo_matrix(
        (np.ones(len(rows)), (rows, cols)), shape=(ds.n_users, n_items)
    ).tocsr()
    mat.sum_duplicates()
    if binarize:
        mat.data[:] = 1.0
    return InteractionMatrix(n_users=ds.n_users, n_items=n_items, matrix=mat, binarized=binarize)


@dataclass(frozen=True)
class TrainSplit:
    """Strong-generalization split: whole users held out for validation.

    validation_users holds (input item indices, held-out item indices)
    pairs; both are disjoint subsets of the user's original items.
    """

    train: InteractionMatrix
    validation_users: tuple[tuple[np.ndarray, np.ndarray], ...]
    seed: int
    skipped_users: int = 0


def split_holdout(
    m: InteractionMatrix,
    validation_fraction: float,
    holdout_fraction: float,
    seed: int,
) -> TrainSplit:
    """Move a fraction of users (entire rows) out of training for evaluation.

    For each validation user, holdout_fraction of their items (rounded
    down, at least 1 when they have >= 2 items) become held-out targets;
    the rest are the fold-in input.  Users that would end with an empty
    input or empty holdout are skipped and counted.
    """
    if not (0.0 <= validation_fraction <= 1.0 and 0.0 <= holdout_fraction <= 1.0):
        raise ValueError("fractions must be in [0, 1]")
    if not m.binarized:
        raise ValueError("split_holdout expects a binarized matrix")
    rng = np.random.default_rng(seed)
    n_val = int(m.n_users * validation_fraction)
    val_users = np.sort(rng.choice(m.n_users, size=n_val, replace=False)) if n_val else np.array([], dtype=np.int64)
    val_set = set(val_users.tolist())
    train_rows = np.array([u for u in range(m.n_users) if u not in val_set], dtype=np.int64)
    train_mat = m.matrix[train_rows].tocsr() if len(train_rows) else sp.csr_matrix((0, m.n_items))
    train = InteractionMatrix(
        n_users=len(train_rows), n_items=m.n_items, matrix=train_mat, binarized=m.binarized
    )
    validation: list[tuple[np.ndarray, np.ndarray]] = []
    skipped = 0
    for u in val_users:
        items = m.user_items(int(u))
        if len(items) < 2:
            skipped += 1
            continue
        n_hold = max(1, int(len(items) * holdout_fraction))
        if n_hold >= len(items):
            skipped += 1
            continue
        held = np.sort(rng.choice(items, size=n_hold, replace=False))
        held_set = set(held.tolist())
        inputs = np.array([i for i in items if i not in held_set], dtype=items.dtype)
        validation.append((inputs, held))
    return TrainSplit(train=train, validation_users=tuple(validation), seed=seed, skipped_users=skipped)


def top_up_merge(base: Dataset, fresh: Dataset, seed: int = 0) -> Dataset:
    """Union two datasets (collapsing duplicates) and shuffle the user order.

    The shuffle is the "appropriately randomized" step before a study
    wave; it only permutes the user index, never the event multiset.
    """
    merged = Dataset.from_events(list(base.events) + list(fresh.events))
    users = list(merged.user_index.keys())
    rng = np.random.default_rng(seed)
    rng.shuffle(users)
    user_index = {u: i for i, u in enumerate(users)}
    return Dataset(events=merged.events, user_index=user_index, track_index=merged.track_index)
