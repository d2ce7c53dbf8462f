"""Study session state machine and the in-memory session store.

Legal transitions only:
    Created -> Consented -> Collecting -> Recommending -> Rating -> Completed
plus (any state before Completed) -> Failed(reason).  items exist exactly in
Rating/Completed, and Completed requires one track response per presented
item plus the global response.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field, replace
from typing import Optional

from ..dataset import TrackKey
from ..preview import PresentationList


class UnknownSession(Exception):
    pass


class WrongState(Exception):
    def __init__(self, state: str, wanted: str):
        super().__init__(f"session is {state}, expected {wanted}")
        self.state = state


class IllegalTransition(Exception):
    def __init__(self, state: str, event: str):
        super().__init__(f"no transition from {state} on {event}")
        self.state = state
        self.event = event


class DuplicateResponse(Exception):
    pass


class JobAlreadyRunning(Exception):
    pass


STATES = ("Created", "Consented", "Collecting", "Recommending", "Rating", "Completed", "Failed")

_TRANSITIONS = {
    ("Created", "consent"): "Consented",
    ("Consented", "username_accepted"): "Collecting",
    ("Collecting", "collection_done"): "Recommending",
    ("Recommending", "recommendation_done"): "Rating",
    ("Rating", "last_response"): "Completed",
}


@dataclass(frozen=True)
class TrackResponse:
    session_id: str
    rank: int
    track: TrackKey
    answers: dict
    answered_at: float


@dataclass(frozen=True)
class GlobalResponse:
    session_id: str
    answers: dict
    answered_at: float


@dataclass(frozen=True)
class StudySession:
    session_id: str
    state: str = "Created"
    username: Optional[str] = None
    items: Optional[PresentationList] = None
    track_responses: dict = field(default_factory=dict)  # rank -> TrackResponse
    global_response: Optional[GlobalResponse] = None
    failure_reason: Optional[str] = None
    model_name: Optional[str] = None
    created_at: float = field(default_factory=time.time)
    updated_at: float = field(default_factory=time.time)


def session_transition(
    s: StudySession,
    event: str,
    *,
    username: Optional[str] = None,
    items: Optional[PresentationList] = None,
    reason: Optional[str] = None,
) -> StudySession:
    """Apply one state-machine event, returning the updated session.

    Raises IllegalTransition for anything outside the legal table.  The
    recommendation_done event must carry the presentation items so the
    items-present-iff-Rating invariant holds atomically.
    """
    now = time.time()
    if event == "failure":
        if s.state in ("Completed", "Failed"):
            raise IllegalTransition(s.state, event)
        return replace(s, state="Failed", failure_reason=reason or "internal", updated_at=now)
    target = _TRANSITIONS.get((s.state, event))
    if target is None:
        raise IllegalTransition(s.state, event)
    if event == "username_accepted":
        if not username:
            raise ValueError("username_accepted requires a username")
        return replace(s, state=target, username=username, updated_at=now)
    if event == "recommendation_done":
        if items is None:
            raise ValueError("recommendation_done requires items")
        return replace(s, state=target, items=items, updated_at=now)
    if event == "last_response":
        assert s.items is not None
        if len(s.track_responses) != len(s.items.items) or s.global_response is None:
            raise IllegalTransition(s.state, "last_response (responses incomplete)")
        return replace(s, state=target, updated_at=now)
    return replace(s, state=target, updated_at=now)


def responses_complete(s: StudySession) -> bool:
    return (
        s.items is not None
        and len(s.track_responses) == len(s.items.items)
        and s.global_response is not None
    )


@dataclass
class JobHandle:
    session_id: str
    phase: str  # Collecting | Recommending
    progress: float = 0.0
    error: Optional[str] = None

    def advance(self, phase: str, progress: float) -> None:
        # progress is monotone non-decreasing within a phase
        if phase == self.phase:
            progress = max(progress, self.progress)
        self.phase = phase
        self.progress = min(1.0, progress)


class SessionStore:
    """In-memory sessions keyed by id; mutation is serialized per session."""

    def __init__(self):
        self._sessions: dict[str, StudySession] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._jobs: dict[str, JobHandle] = {}
        self._map_lock = threading.Lock()

    def create(self) -> StudySession:
        session = StudySession(session_id=uuid.uuid4().hex)
        with self._map_lock:
            self._sessions[session.session_id] = session
            self._locks[session.session_id] = threading.Lock()
        return session

    def get(self, session_id: str) -> StudySession:
        with self._map_lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise UnknownSession(session_id)
        return session

    def lock(self, session_id: str) -> threading.Lock:
        with self._map_lock:
            lock = self._locks.get(session_id)
        if lock is None:
            raise UnknownSession(session_id)
        return lock

    def put(self, session: StudySession) -> None:
        with self._map_lock:
            self._sessions[session.session_id] = session

    def all_sessions(self) -> list[StudySession]:
        with self._map_lock:
            return list(self._sessions.values())

    def job(self, session_id: str) -> Optional[JobHandle]:
        with self._map_lock:
            return self._jobs.get(session_id)

    def attach_job(self, session_id: str) -> JobHandle:
        with self._map_lock:
            if session_id in self._jobs:
                raise JobAlreadyRunning(session_id)
            handle = JobHandle(session_id=session_id, phase="Collecting")
            self._jobs[session_id] = handle
            return handle
