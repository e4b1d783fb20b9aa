"""Service configuration: JSON file with environment-variable overrides."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .quiz import DEFAULT_DUMMY_ENTRIES, ScoreboardEntry
from .session import DEFAULT_REST_MS

ENV_PREFIX = "STRESSMAT_"


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8000
    store_root: Path = Path("./sessions")
    media_url: str = ""
    rest_ms: int = DEFAULT_REST_MS
    scoreboard: tuple[ScoreboardEntry, ...] = DEFAULT_DUMMY_ENTRIES

    def __post_init__(self):
        self.store_root = Path(self.store_root)


def load_config(path=None, env=None) -> ServiceConfig:
    """Build the config from an optional JSON file, then apply env overrides.

    Recognized variables: STRESSMAT_HOST, STRESSMAT_PORT,
    STRESSMAT_STORE_ROOT, STRESSMAT_MEDIA_URL, STRESSMAT_REST_MS.
    """
    env = os.environ if env is None else env
    raw: dict = {}
    if path is not None:
        raw = json.loads(Path(path).read_text())

    scoreboard = DEFAULT_DUMMY_ENTRIES
    if "scoreboard" in raw:
        scoreboard = tuple(
            ScoreboardEntry(e["name"], int(e["score"])) for e in raw["scoreboard"]
        )

    cfg = ServiceConfig(
        host=raw.get("host", "127.0.0.1"),
        port=int(raw.get("port", 8000)),
        store_root=Path(raw.get("store_root", "./sessions")),
        media_url=raw.get("media_url", ""),
        rest_ms=int(raw.get("rest_ms", DEFAULT_REST_MS)),
        scoreboard=scoreboard,
    )

    if env.get(ENV_PREFIX + "HOST"):
        cfg.host = env[ENV_PREFIX + "HOST"]
    if env.get(ENV_PREFIX + "PORT"):
        cfg.port = int(env[ENV_PREFIX + "PORT"])
    if env.get(ENV_PREFIX + "STORE_ROOT"):
        cfg.store_root = Path(env[ENV_PREFIX + "STORE_ROOT"])
    if env.get(ENV_PREFIX + "MEDIA_URL"):
        cfg.media_url = env[ENV_PREFIX + "MEDIA_URL"]
    if env.get(ENV_PREFIX + "REST_MS"):
        cfg.rest_ms = int(env[ENV_PREFIX + "REST_MS"])
    return cfg
