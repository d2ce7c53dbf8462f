"""Shared fixtures: a full study environment against mock external services."""

import json
import threading
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pytest
import requests
import scipy.sparse as sp
import uvicorn
from fastapi.testclient import TestClient

from recstudy.dataset import InteractionMatrix
from recstudy.mocks import MockCatalogServer, MockScrobbleServer
from recstudy.models import TrainingConfig, save_model, train_mf, train_multvae
from recstudy.service import ServiceConfig, create_app

N_TRACKS = 60


def track_name(i):
    return (f"Artist {i}", f"Track {i}")


def training_matrix(seed=0, n_users=40, n_tracks=N_TRACKS):
    rng = np.random.default_rng(seed)
    dense = np.zeros((n_users, n_tracks))
    for u in range(n_users):
        items = rng.choice(n_tracks, size=12, replace=False)
        dense[u, items] = 1.0
    return InteractionMatrix(
        n_users=n_users, n_items=n_tracks, matrix=sp.csr_matrix(dense), binarized=True
    )


def write_models(tmp_path, kinds=("mf", "multvae")):
    m = training_matrix()
    catalog = tuple(track_name(i) for i in range(N_TRACKS))
    paths = []
    if "mf" in kinds:
        model = train_mf(m, TrainingConfig(d=4, als_iterations=3, rng_seed=0))
        model.item_catalog = catalog
        path = tmp_path / "mf.lrs1"
        save_model(model, path)
        paths.append(str(path))
    if "multvae" in kinds:
        model = train_multvae(
            m, TrainingConfig(h=8, k=2, epochs=2, batch_size=16, learning_rate=0.05, rng_seed=0)
        )
        model.item_catalog = catalog
        path = tmp_path / "vae.lrs1"
        save_model(model, path)
        paths.append(str(path))
    return paths


def scrobble_world(participant_track_range=range(40, 60), participant_events=120):
    """Participant listens to the upper tracks; recommendations must come
    from elsewhere in the catalog."""
    tracks = list(participant_track_range)
    events = []
    for i in range(participant_events):
        artist, title = track_name(tracks[i % len(tracks)])
        events.append({"artist": artist, "title": title, "timestamp": 10_000 + i})
    little = [{"artist": "Artist 1", "title": "Track 1", "timestamp": 5}]
    return {
        "users": {
            "participant": {"public": True, "friends": [], "events": events},
            "littleplays": {"public": True, "friends": [], "events": little},
            "privateguy": {"public": False, "friends": [], "events": events[:50]},
        }
    }


def catalog_fixture(missing_every=10):
    """Every missing_every-th track is absent from the catalog (10% by default)."""
    tracks = []
    for i in range(N_TRACKS):
        if missing_every and i % missing_every == 0:
            continue
        artist, title = track_name(i)
        tracks.append(
            {
                "id": f"cat{i}",
                "artist": artist,
                "title": title,
                "artwork_url": f"http://art.example/{i}.jpg",
                "preview_url": f"http://preview.example/{i}.mp3",
                "preview_markets": ["US", "GB"],
                "preview_seconds": 30,
            }
        )
    return {"markets": ["US", "GB"], "tracks": tracks}


QUESTIONS = {
    "per_track": [
        {"id": "fit", "prompt": "How appropriate is this track for you?", "kind": "likert-1-5"},
        {"id": "known", "prompt": "How familiar were you with it?", "kind": "likert-1-5"},
    ],
    "global": [
        {"id": "overall", "prompt": "How satisfied are you with the whole list?", "kind": "likert-1-5"},
        {"id": "comments", "prompt": "Anything else?", "kind": "free-text", "required": False},
    ],
}


class HttpClient:
    """requests-backed client with the TestClient path-based surface."""

    def __init__(self, base_url):
        self.base_url = base_url
        self._session = requests.Session()

    def get(self, path, **kwargs):
        return self._session.get(self.base_url + path, **kwargs)

    def post(self, path, **kwargs):
        return self._session.post(self.base_url + path, **kwargs)


@dataclass
class StudyEnv:
    client: object  # TestClient or HttpClient
    ctx: object
    config: ServiceConfig
    scrobble: MockScrobbleServer
    catalog: MockCatalogServer
    log_path: str
    base_url: Optional[str] = None
    _test_client: Optional[TestClient] = None
    _server: Optional[uvicorn.Server] = None
    _server_thread: Optional[threading.Thread] = None


def make_env(
    tmp_path,
    *,
    kinds=("mf",),
    assignment="fixed",
    page_latency=0.0,
    page_size=200,
    threshold=100,
    list_length=10,
    world=None,
    catalog=None,
    over_http=False,
):
    scrobble = MockScrobbleServer(world or scrobble_world(), page_latency_s=page_latency).start()
    catalog_srv = MockCatalogServer(catalog or catalog_fixture()).start()
    question_file = tmp_path / "questions.json"
    question_file.write_text(json.dumps(QUESTIONS), encoding="utf-8")
    log_path = tmp_path / "responses.ndjson"
    config = ServiceConfig(
        scrobble_base_url=scrobble.base_url,
        scrobble_page_size=page_size,
        catalog_base_url=catalog_srv.base_url,
        model_paths=write_models(tmp_path, kinds),
        model_assignment=assignment,
        list_length=list_length,
        eligibility_threshold=threshold,
        question_file=str(question_file),
        admin_token="sekrit",
        response_log_path=str(log_path),
    )
    app = create_app(config)
    env = StudyEnv(
        client=None,
        ctx=None,
        config=config,
        scrobble=scrobble,
        catalog=catalog_srv,
        log_path=str(log_path),
    )
    if over_http:
        server = uvicorn.Server(
            uvicorn.Config(app, host="127.0.0.1", port=0, log_level="error", lifespan="on")
        )
        thread = threading.Thread(target=server.run, daemon=True)
        thread.start()
        deadline = time.monotonic() + 10
        while not server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("uvicorn did not start")
            time.sleep(0.01)
        port = server.servers[0].sockets[0].getsockname()[1]
        env.base_url = f"http://127.0.0.1:{port}"
        env.client = HttpClient(env.base_url)
        env._server, env._server_thread = server, thread
    else:
        test_client = TestClient(app)
        test_client.__enter__()  # runs lifespan
        env.client = test_client
        env._test_client = test_client
    env.ctx = app.state.ctx
    return env


def close_env(env: StudyEnv):
    if env._test_client is not None:
        env._test_client.__exit__(None, None, None)
    if env._server is not None:
        env._server.should_exit = True
        env._server_thread.join(timeout=10)
    env.scrobble.stop()
    env.catalog.stop()


@pytest.fixture
def study_env(tmp_path):
    env = make_env(tmp_path)
    yield env
    close_env(env)


def wait_for_state(client, session_id, targets, timeout=15.0):
    import time

    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        status = client.get(f"/api/sessions/{session_id}/status").json()
        if status["state"] in targets:
            return status
        time.sleep(0.02)
    raise AssertionError(f"session never reached {targets}; last status {status}")


def run_to_rating(client, username="participant"):
    session_id = client.post("/api/sessions").json()["session_id"]
    assert client.post(f"/api/sessions/{session_id}/consent").status_code == 200
    r = client.post(f"/api/sessions/{session_id}/username", json={"username": username})
    assert r.status_code == 202, r.text
    status = wait_for_state(client, session_id, {"Rating", "Failed"})
    return session_id, status
