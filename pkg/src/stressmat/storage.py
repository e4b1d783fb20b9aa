"""On-disk session store.

One directory per session, all text:

    <root>/<session_id>/
        metadata.json   session identity, seed, epoch, sensor clock offset
        events.jsonl    one session event per line, append-only
        ecg.csv         "t_ms,ecg_mv" header + one sample per line
        ppg.csv         "t_ms,ppg"    (stored, never analyzed)
        eda.csv         "t_ms,eda"    (stored, never analyzed)

A finalized session is immutable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .session import SessionEvent, SessionState, replay

CHANNELS = ("ecg", "ppg", "eda")
CHANNEL_COLUMNS = {"ecg": "ecg_mv", "ppg": "ppg", "eda": "eda"}

METADATA_FILE = "metadata.json"
EVENTS_FILE = "events.jsonl"


def _event_line(event: SessionEvent) -> str:
    return json.dumps(event.to_dict(), sort_keys=True, separators=(",", ":"))


@dataclass
class ChannelMeta:
    sampling_rate_hz: float
    last_t_ms: float
    count: int


@dataclass
class SessionDir:
    """File handle bundle for a single session's directory."""

    path: Path

    @property
    def metadata_path(self) -> Path:
        return self.path / METADATA_FILE

    @property
    def events_path(self) -> Path:
        return self.path / EVENTS_FILE

    def channel_path(self, channel: str) -> Path:
        return self.path / f"{channel}.csv"

    def read_metadata(self) -> dict:
        return json.loads(self.metadata_path.read_text())

    def write_metadata(self, meta: dict) -> None:
        self.metadata_path.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")

    def append_events(self, events: Sequence[SessionEvent]) -> None:
        if not events:
            return
        with open(self.events_path, "a") as fh:
            fh.writelines(_event_line(ev) + "\n" for ev in events)

    def read_events(self) -> list[SessionEvent]:
        events = []
        with open(self.events_path) as fh:
            for line in fh:
                line = line.strip()
                if line:
                    events.append(SessionEvent.from_dict(json.loads(line)))
        return events

    def append_samples(self, channel: str, t_ms: Sequence[float],
                       values: Sequence[float]) -> None:
        path = self.channel_path(channel)
        new = not path.exists()
        with open(path, "a") as fh:
            if new:
                fh.write(f"t_ms,{CHANNEL_COLUMNS[channel]}\n")
            fh.writelines(f"{t!r},{v!r}\n" for t, v in zip(t_ms, values))

    def channel_sample_count(self, channel: str) -> int:
        path = self.channel_path(channel)
        if not path.exists():
            return 0
        with open(path) as fh:
            return max(0, sum(1 for _ in fh) - 1)

    def load_channel_meta(self, channel: str) -> Optional[ChannelMeta]:
        """Recover per-channel append state from the file tail."""
        path = self.channel_path(channel)
        if not path.exists():
            return None
        count = 0
        first = last = None
        with open(path) as fh:
            fh.readline()  # header
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                count += 1
                t = float(line.split(",", 1)[0])
                if first is None:
                    first = t
                last = t
        if count < 2 or first is None or last is None:
            return None
        step = (last - first) / (count - 1)
        return ChannelMeta(sampling_rate_hz=1000.0 / step, last_t_ms=last, count=count)


@dataclass
class SessionStore:
    root: Path

    def __post_init__(self):
        self.root = Path(self.root)
        self.root.mkdir(parents=True, exist_ok=True)

    def session_ids(self) -> list[str]:
        return sorted(
            p.name for p in self.root.iterdir()
            if p.is_dir() and (p / METADATA_FILE).exists()
        )

    def session_dir(self, session_id: str) -> SessionDir:
        return SessionDir(self.root / session_id)

    def exists(self, session_id: str) -> bool:
        return self.session_dir(session_id).metadata_path.exists()

    def create(self, state: SessionState, epoch_wall_ms: int, created_at: str) -> SessionDir:
        sdir = self.session_dir(state.session_id)
        sdir.path.mkdir(parents=True, exist_ok=False)
        sdir.write_metadata(
            {
                "session_id": state.session_id,
                "participant_label": state.participant_label,
                "seed": state.seed,
                "rest_ms": state.rest_ms,
                "epoch_wall_ms": epoch_wall_ms,
                "created_at": created_at,
                "sensor_offset_ms": None,
                "finalized": False,
                "phase": state.current_phase.value,
                "score": state.score,
                "finished_t_ms": None,
            }
        )
        sdir.append_events(state.events)
        return sdir

    def load_state(self, session_id: str) -> tuple[SessionState, dict]:
        """Rebuild the in-memory state by replaying the persisted log."""
        sdir = self.session_dir(session_id)
        meta = sdir.read_metadata()
        events = sdir.read_events()
        state = replay(
            events,
            participant_label=meta["participant_label"],
            seed=meta["seed"],
            session_id=meta["session_id"],
            rest_ms=meta.get("rest_ms", 180_000),
        )
        return state, meta
