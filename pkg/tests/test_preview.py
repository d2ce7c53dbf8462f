"""Preview resolution tests against the mock catalog."""

import pytest

from recstudy.dataset import TrackKey
from recstudy.mocks import MockCatalogServer
from recstudy.preview import (
    CatalogApiConfig,
    CatalogUnavailable,
    Discarded,
    PreviewQuery,
    PreviewResult,
    resolve_preview,
    resolve_ranked_list,
)


def track(i, artist=None, title=None, markets=("US", "GB")):
    return {
        "id": f"cat{i}",
        "artist": artist or f"Artist {i}",
        "title": title or f"Track {i}",
        "artwork_url": f"http://art.example/{i}.jpg",
        "preview_url": f"http://preview.example/{i}.mp3",
        "preview_markets": list(markets),
        "preview_seconds": 30,
    }


CATALOG = {
    "markets": ["US", "GB", "DE"],
    "tracks": [
        track(0),
        track(1, artist="Cased Band", title="Shouted Song"),
        track(2, markets=("GB",)),  # no preview in US
        track(3),
        track(4),
        track(5),
    ],
}


@pytest.fixture(scope="module")
def server():
    with MockCatalogServer(CATALOG) as srv:
        yield srv


@pytest.fixture(autouse=True)
def _no_leftover_failures(server):
    yield
    server.clear_failures()


def cfg_for(server, **kwargs):
    return CatalogApiConfig(base_url=server.base_url, backoff_base_s=0.01, **kwargs)


def test_exact_match_returns_30s_preview(server):
    result = resolve_preview(cfg_for(server), PreviewQuery("Artist 0", "Track 0", "US"))
    assert isinstance(result, PreviewResult)
    assert result.preview_duration == 30
    assert result.catalog_track_id == "cat0"
    assert result.preview_url.endswith("0.mp3")
    assert result.embed_markup_ref == "embed:track:cat0"


def test_no_results_discarded(server):
    result = resolve_preview(cfg_for(server), PreviewQuery("Nobody", "Nothing", "US"))
    assert result == Discarded("no-results")


def test_case_mismatch_discarded(server):
    # catalog has the track only under different casing
    result = resolve_preview(cfg_for(server), PreviewQuery("cased band", "shouted song", "US"))
    assert result == Discarded("no-exact-match")


def test_case_fold_config_relaxes_matching(server):
    cfg = cfg_for(server, case_fold=True)
    result = resolve_preview(cfg, PreviewQuery("cased band", "shouted song", "US"))
    assert isinstance(result, PreviewResult)


def test_no_preview_in_market_discarded(server):
    result = resolve_preview(cfg_for(server), PreviewQuery("Artist 2", "Track 2", "US"))
    assert result == Discarded("no-preview-in-market")
    assert isinstance(
        resolve_preview(cfg_for(server), PreviewQuery("Artist 2", "Track 2", "GB")), PreviewResult
    )


def test_unsupported_market_falls_back_to_default(server):
    cfg = cfg_for(server, default_market="US")
    result = resolve_preview(cfg, PreviewQuery("Artist 0", "Track 0", "XX"))
    assert isinstance(result, PreviewResult)


def test_catalog_down_is_an_error_not_a_discard(server):
    server.fail_next(500, times=10)
    with pytest.raises(CatalogUnavailable):
        resolve_preview(cfg_for(server, max_retries=1), PreviewQuery("Artist 0", "Track 0", "US"))


def test_query_validation():
    with pytest.raises(ValueError):
        PreviewQuery("", "Track", "US")
    with pytest.raises(ValueError):
        PreviewQuery("Artist", "Track", "usa")


# --- ranked-list resolution -------------------------------------------------------


def keys(*pairs):
    return [TrackKey(a, t) for a, t in pairs]


def test_resolve_list_no_misses(server):
    tracks = keys(("Artist 0", "Track 0"), ("Artist 3", "Track 3"), ("Artist 4", "Track 4"))
    plist = resolve_ranked_list(cfg_for(server), tracks, "US", 2)
    assert [r for r, _, _ in plist.items] == [0, 1]
    assert plist.discarded_count == 0


def test_resolve_list_backfills_after_miss(server):
    tracks = keys(
        ("Artist 0", "Track 0"),
        ("Missing", "Gone"),  # miss inside top n
        ("Artist 3", "Track 3"),
        ("Artist 4", "Track 4"),
    )
    plist = resolve_ranked_list(cfg_for(server), tracks, "US", 3)
    assert [r for r, _, _ in plist.items] == [0, 2, 3]
    assert plist.discarded_count == 1
    assert len(plist.items) == 3 and not plist.shortfall


def test_resolve_list_shortfall_when_exhausted(server):
    tracks = keys(("Artist 0", "Track 0"), ("Missing", "Gone"))
    plist = resolve_ranked_list(cfg_for(server), tracks, "US", 5)
    assert len(plist.items) == 1
    assert plist.shortfall
    assert plist.discarded_count == 1


def test_resolve_list_counts_consumed(server):
    tracks = keys(
        ("Missing", "One"),
        ("Artist 0", "Track 0"),
        ("Missing", "Two"),
        ("Artist 3", "Track 3"),
        ("Artist 4", "Track 4"),  # never consumed: n reached first
    )
    plist = resolve_ranked_list(cfg_for(server), tracks, "US", 2)
    assert plist.discarded_count + len(plist.items) == 4


def test_resolution_deterministic(server):
    tracks = keys(("Artist 0", "Track 0"), ("Artist 3", "Track 3"))
    a = resolve_ranked_list(cfg_for(server), tracks, "US", 2)
    b = resolve_ranked_list(cfg_for(server), tracks, "US", 2)
    assert a == b


def test_presentation_list_order_preserved(server):
    tracks = keys(
        ("Artist 5", "Track 5"),
        ("Artist 4", "Track 4"),
        ("Artist 0", "Track 0"),
    )
    plist = resolve_ranked_list(cfg_for(server), tracks, "US", 3)
    titles = [key.track_title for _, key, _ in plist.items]
    assert titles == ["Track 5", "Track 4", "Track 0"]
