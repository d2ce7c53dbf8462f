"""Append-only NDJSON response log; the durable record of a study run.

One JSON object per line, field "kind" in {session_event, track_response,
global_response}.  Sessions are reconstructible from the log alone: replay
applies the same transition table the live store used.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from typing import Optional


class ResponseLog:
    """Serialized single-writer appender."""

    def __init__(self, path):
        self.path = path
        self._lock = threading.Lock()

    def append(self, record: dict) -> None:
        line = json.dumps(record, ensure_ascii=False)
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")
                fh.flush()


@dataclass
class ReplayedSession:
    session_id: str
    state: str = "Created"
    username: Optional[str] = None
    item_count: int = 0
    track_ranks: set = field(default_factory=set)
    has_global: bool = False
    failure_reason: Optional[str] = None


def replay_log(path) -> dict[str, ReplayedSession]:
    """Rebuild session end-states from the log."""
    sessions: dict[str, ReplayedSession] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            sid = record["session_id"]
            if record["kind"] == "session_event":
                event = record["event"]
                if event == "created":
                    sessions[sid] = ReplayedSession(session_id=sid)
                    continue
                s = sessions[sid]
                s.state = record["state_after"]
                if event == "username_accepted":
                    s.username = record.get("username")
                elif event == "recommendation_done":
                    s.item_count = len(record.get("items", []))
                elif event == "failure":
                    s.failure_reason = record.get("reason")
            elif record["kind"] == "track_response":
                sessions[sid].track_ranks.add(record["rank"])
            elif record["kind"] == "global_response":
                sessions[sid].has_global = True
    return sessions
