"""Pydantic request/response models for the study HTTP API."""

from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel


class SessionCreated(BaseModel):
    session_id: str


class UsernameRequest(BaseModel):
    username: str
    market: Optional[str] = None  # 2-letter region; server default when absent


class StatusResponse(BaseModel):
    state: str
    phase: Optional[str] = None
    progress: Optional[float] = None
    reason: Optional[str] = None


class QuestionOut(BaseModel):
    id: str
    prompt: str
    kind: str
    required: bool


class ItemOut(BaseModel):
    rank: int
    artist: str
    title: str
    preview_url: str
    artwork_url: str
    embed_markup_ref: str
    questions: list[QuestionOut]


class ItemsResponse(BaseModel):
    items: list[ItemOut]
    global_questions: list[QuestionOut]


class TrackResponseRequest(BaseModel):
    rank: int
    answers: dict[str, Any]


class GlobalResponseRequest(BaseModel):
    answers: dict[str, Any]


class Acknowledged(BaseModel):
    state: str
