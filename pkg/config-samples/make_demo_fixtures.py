"""Generate demo fixtures for the mock scrobble and catalog servers.

Writes scrobble-world.json (a small friend graph with listening histories)
and catalog.json (previews for most of those tracks) into this directory.
"""

import json
from pathlib import Path

import numpy as np

HERE = Path(__file__).parent
N_TRACKS = 80
rng = np.random.default_rng(7)


def track(i):
    return f"Demo Artist {i % 25}", f"Demo Track {i}"


def history(n, lo, hi, taste_size=25):
    # each listener sticks to a personal subset; popularity is Zipf-ish
    pool = np.arange(lo, hi)
    weights = 1.0 / (1 + np.argsort(np.argsort(pool)))
    taste = rng.choice(pool, size=min(taste_size, len(pool)), replace=False, p=weights / weights.sum())
    events = []
    for j in range(n):
        artist, title = track(int(rng.choice(taste)))
        events.append({"artist": artist, "title": title, "timestamp": 1_700_000_000 + 60 * j})
    return events


users = {}
names = [f"demo_user_{i}" for i in range(12)]
for i, name in enumerate(names):
    friends = [names[(i + k) % len(names)] for k in (1, 2, 5)]
    users[name] = {"public": True, "friends": friends, "events": history(180, 0, N_TRACKS)}
# a fresh participant whose taste sits in the upper half of the catalog
users["demo_participant"] = {"public": True, "friends": [], "events": history(150, 40, N_TRACKS)}
users["demo_newbie"] = {"public": True, "friends": [], "events": history(10, 0, N_TRACKS)}
users["demo_private"] = {"public": False, "friends": [], "events": history(120, 0, N_TRACKS)}

(HERE / "scrobble-world.json").write_text(json.dumps({"users": users}, indent=1), encoding="utf-8")

tracks = []
for i in range(N_TRACKS):
    if i % 12 == 0:
        continue  # a few tracks have no catalog entry, exercising the discard path
    artist, title = track(i)
    tracks.append(
        {
            "id": f"demo{i}",
            "artist": artist,
            "title": title,
            "artwork_url": f"https://art.invalid/{i}.jpg",
            "preview_url": f"https://preview.invalid/{i}.mp3",
            "preview_markets": ["US", "GB", "DE"],
            "preview_seconds": 30,
        }
    )
(HERE / "catalog.json").write_text(
    json.dumps({"markets": ["US", "GB", "DE"], "tracks": tracks}, indent=1), encoding="utf-8"
)
print(f"wrote {len(users)} users and {len(tracks)} catalog tracks")
