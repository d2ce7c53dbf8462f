"""Deterministic in-process HTTP mocks for the scrobble and catalog services."""

from .catalog import MockCatalogServer
from .scrobble import MockScrobbleServer

__all__ = ["MockCatalogServer", "MockScrobbleServer"]
