"""Survey question definitions and answer validation.

Question content is operator-supplied config, loaded from a JSON file:
    {"per_track": [{"id": "fit", "prompt": "...", "kind": "likert-1-5"}],
     "global": [{"id": "overall", "prompt": "...", "kind": "free-text", "required": false}]}
"""

from __future__ import annotations

import json
from typing import Literal

from pydantic import BaseModel, Field, model_validator


class InvalidAnswer(Exception):
    def __init__(self, question_id: str, reason: str):
        super().__init__(f"{question_id}: {reason}")
        self.question_id = question_id
        self.reason = reason


class Question(BaseModel):
    id: str
    prompt: str
    kind: Literal["likert-1-5", "free-text"]
    required: bool = True


class QuestionSet(BaseModel):
    per_track: list[Question]
    global_questions: list[Question] = Field(alias="global")

    model_config = {"populate_by_name": True}

    @model_validator(mode="after")
    def _unique_ids(self):
        ids = [q.id for q in self.per_track + self.global_questions]
        if len(set(ids)) != len(ids):
            raise ValueError("question ids must be unique")
        return self

    @classmethod
    def load(cls, path) -> "QuestionSet":
        with open(path, encoding="utf-8") as fh:
            return cls.model_validate(json.load(fh))


def validate_answers(questions: list[Question], answers: dict) -> None:
    """Raise InvalidAnswer unless every required question has an in-range value."""
    known = {q.id: q for q in questions}
    for qid in answers:
        if qid not in known:
            raise InvalidAnswer(qid, "unknown question")
    for q in questions:
        if q.id not in answers:
            if q.required:
                raise InvalidAnswer(q.id, "required answer missing")
            continue
        value = answers[q.id]
        if q.kind == "likert-1-5":
            if not isinstance(value, int) or isinstance(value, bool) or not 1 <= value <= 5:
                raise InvalidAnswer(q.id, f"expected an integer in 1..5, got {value!r}")
        else:
            if not isinstance(value, str):
                raise InvalidAnswer(q.id, "expected text")
