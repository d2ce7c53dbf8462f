"""Service configuration: JSON file plus RECSTUDY_* environment overrides."""

from __future__ import annotations

import json
import os
from typing import Optional

from pydantic import BaseModel, Field


class ServiceConfig(BaseModel):
    # scrobble API
    scrobble_base_url: str
    scrobble_api_key: Optional[str] = None
    scrobble_page_size: int = Field(default=200, ge=1, le=500)
    scrobble_min_interval_ms: float = 0.0
    # catalog API
    catalog_base_url: str
    default_market: str = "US"
    # models
    model_paths: list[str]
    model_assignment: str = "fixed"  # "fixed" (first path) or "round-robin"
    # study parameters
    list_length: int = 10
    candidate_depth: int = 100  # ranked candidates handed to preview resolution
    eligibility_threshold: int = 100
    question_file: str
    # runtime
    io_workers: int = 8
    cpu_workers: int = 2
    port: int = 8000
    admin_token: str
    response_log_path: str = "responses.ndjson"
    static_dir: Optional[str] = None

    @classmethod
    def load(cls, path, env: Optional[dict] = None) -> "ServiceConfig":
        """Read the JSON config file, then apply RECSTUDY_<FIELD> overrides."""
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        env = os.environ if env is None else env
        for name in cls.model_fields:
            key = f"RECSTUDY_{name.upper()}"
            if key in env:
                raw = env[key]
                if raw and raw.lstrip()[:1] in "[{":
                    data[name] = json.loads(raw)
                else:
                    data[name] = raw
        return cls.model_validate(data)
