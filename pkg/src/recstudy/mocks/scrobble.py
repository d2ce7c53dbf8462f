"""Mock scrobble API: users, listening events, friends lists from a JSON world.

World shape:
    {"users": {"alice": {"public": true,
                         "friends": ["bob", ...],
                         "events": [{"artist": "A", "title": "T", "timestamp": 123}, ...]}}}
"""

from __future__ import annotations

import json
import re
import time

from ._base import MockHttpServer, paginate

_INFO = re.compile(r"^/users/([^/]+)$")
_EVENTS = re.compile(r"^/users/([^/]+)/events$")
_FRIENDS = re.compile(r"^/users/([^/]+)/friends$")


class MockScrobbleServer(MockHttpServer):
    def __init__(self, world: dict, page_latency_s: float = 0.0, friends_per_page: int = 50):
        super().__init__()
        self.world = world
        self.page_latency_s = page_latency_s
        self.friends_per_page = friends_per_page

    @classmethod
    def from_file(cls, path, **kwargs) -> "MockScrobbleServer":
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh), **kwargs)

    def _user(self, name: str):
        return self.world.get("users", {}).get(name)

    def handle(self, path: str, query: dict) -> tuple[int, dict]:
        m = _EVENTS.match(path)
        if m:
            return self._events(m.group(1), query)
        m = _FRIENDS.match(path)
        if m:
            return self._friends(m.group(1), query)
        m = _INFO.match(path)
        if m:
            return self._info(m.group(1))
        return 404, {"error": "no such route"}

    def _info(self, name: str) -> tuple[int, dict]:
        user = self._user(name)
        if user is None:
            return 404, {"error": "user not found"}
        return 200, {"event_count": len(user.get("events", [])), "public": bool(user.get("public", True))}

    def _guard(self, name: str):
        user = self._user(name)
        if user is None:
            return None, (404, {"error": "user not found"})
        if not user.get("public", True):
            return None, (403, {"error": "private account"})
        return user, None

    def _events(self, name: str, query: dict) -> tuple[int, dict]:
        user, err = self._guard(name)
        if err:
            return err
        if self.page_latency_s:
            time.sleep(self.page_latency_s)
        page = int(query.get("page", 1))
        per_page = int(query.get("per_page", 50))
        chunk, total, total_pages = paginate(user.get("events", []), page, per_page)
        return 200, {"total": total, "total_pages": total_pages, "page": page, "events": chunk}

    def _friends(self, name: str, query: dict) -> tuple[int, dict]:
        user, err = self._guard(name)
        if err:
            return err
        page = int(query.get("page", 1))
        chunk, total, total_pages = paginate(user.get("friends", []), page, self.friends_per_page)
        return 200, {"total": total, "total_pages": total_pages, "page": page, "users": chunk}


def main(argv=None):
    import argparse

    parser = argparse.ArgumentParser(description="Run the mock scrobble API from a JSON world.")
    parser.add_argument("world", help="JSON fixture file")
    parser.add_argument("--port", type=int, default=8081)
    parser.add_argument("--page-latency", type=float, default=0.0)
    args = parser.parse_args(argv)
    server = MockScrobbleServer.from_file(args.world, page_latency_s=args.page_latency)
    print(f"mock scrobble API on http://127.0.0.1:{args.port}")
    server.serve_forever(args.port)


if __name__ == "__main__":
    main()
