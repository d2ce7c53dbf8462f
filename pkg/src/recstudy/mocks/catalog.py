"""Mock catalog search API: track previews with per-market availability.

Catalog shape:
    {"markets": ["US", "GB"],
     "tracks": [{"id": "t1", "artist": "A", "title": "T",
                 "artwork_url": "http://art/1.jpg",
                 "preview_url": "http://preview/1.mp3",
                 "preview_markets": ["US"],
                 "preview_seconds": 30}]}

Search matches artist and title case-insensitively (after NFC + trim) so
the client's exact-match rule is the thing that decides.
"""

from __future__ import annotations

import json
import time
import unicodedata


from ._base import MockHttpServer


def _fold(text: str) -> str:
    return unicodedata.normalize("NFC", text).strip().casefold()


class MockCatalogServer(MockHttpServer):
    def __init__(self, catalog: dict, latency_s: float = 0.0):
        super().__init__()
        self.catalog = catalog
        self.latency_s = latency_s

    @classmethod
    def from_file(cls, path, **kwargs) -> "MockCatalogServer":
        with open(path, encoding="utf-8") as fh:
            return cls(json.load(fh), **kwargs)

    def handle(self, path: str, query: dict) -> tuple[int, dict]:
        if path != "/search":
            return 404, {"error": "no such route"}
        if self.latency_s:
            time.sleep(self.latency_s)
        market = query.get("market", "")
        if market not in self.catalog.get("markets", []):
            return 400, {"error": f"unsupported market {market!r}"}
        artist = _fold(query.get("artist", ""))
        title = _fold(query.get("title", ""))
        results = []
        for track in self.catalog.get("tracks", []):
            if _fold(track["artist"]) == artist and _fold(track["title"]) == title:
                available = market in track.get("preview_markets", [])
                results.append(
                    {
                        "id": track["id"],
                        "artist": track["artist"],
                        "title": track["title"],
                        "preview_url": track["preview_url"] if available else None,
                        "artwork_url": track.get("artwork_url", ""),
                        "preview_seconds": int(track.get("preview_seconds", 30)),
                    }
                )
        return 200, {"results": results}


def main(argv=None):
    import argparse

    parser = argparse.ArgumentParser(description="Run the mock catalog API from a JSON fixture.")
    parser.add_argument("catalog", help="JSON fixture file")
    parser.add_argument("--port", type=int, default=8082)
    args = parser.parse_args(argv)
    server = MockCatalogServer.from_file(args.catalog)
    print(f"mock catalog API on http://127.0.0.1:{args.port}")
    server.serve_forever(args.port)


if __name__ == "__main__":
    main()
