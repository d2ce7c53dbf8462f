"""Study web service: session orchestration over the trained models."""

from .app import build_context, create_app
from .config import ServiceConfig
from .questions import InvalidAnswer, Question, QuestionSet, validate_answers
from .responselog import ResponseLog, replay_log
from .sessions import (
    DuplicateResponse,
    GlobalResponse,
    IllegalTransition,
    JobAlreadyRunning,
    JobHandle,
    SessionStore,
    StudySession,
    TrackResponse,
    UnknownSession,
    WrongState,
    session_transition,
)

__all__ = [
    "DuplicateResponse",
    "GlobalResponse",
    "IllegalTransition",
    "InvalidAnswer",
    "JobAlreadyRunning",
    "JobHandle",
    "Question",
    "QuestionSet",
    "ResponseLog",
    "ServiceConfig",
    "SessionStore",
    "StudySession",
    "TrackResponse",
    "UnknownSession",
    "WrongState",
    "build_context",
    "create_app",
    "replay_log",
    "session_transition",
    "validate_answers",
]
