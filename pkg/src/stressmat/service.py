"""HTTP/WebSocket service exposing the study protocol and sensor ingestion.

The service is the clock authority for quiz events. Timer-driven progress
(phase deadlines, question slots, timeouts) is rolled forward lazily on
every request, with events stamped at their exact nominal boundaries, so a
session's log is identical no matter when requests actually arrived.

Questions inside a level occupy fixed time slots (question i spans
[start + i*limit, start + (i+1)*limit)), which keeps every level's duration
at exactly its 30-question budget. The demo is self-paced per question.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Callable, Optional

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel

from . import quiz, session
from .analysis import (
    CorruptSessionError,
    IncompleteSessionError,
    analyze_session,
    phase_report,
)
from .config import ServiceConfig
from .errors import ProtocolViolationError, StressmatError
from .session import PhaseKind, SessionState
from .storage import CHANNELS, SessionStore

Clock = Callable[[], int]


def wall_clock_ms() -> int:
    return int(time.time() * 1000)


class CreateSessionRequest(BaseModel):
    participant_label: str = ""
    seed: Optional[int] = None


class StepRequest(BaseModel):
    action: str  # consent | continue | answer | timeout
    value: Optional[int] = None


class SensorBatch(BaseModel):
    session_id: Optional[str] = None
    channel: str
    sampling_rate_hz: float
    first_sample_t_ms: float
    values: list[float]


@dataclass
class LiveSession:
    state: SessionState
    meta: dict
    sdir: object
    lock: threading.RLock = field(default_factory=threading.RLock)
    channel_locks: dict = field(default_factory=dict)
    events_written: int = 0

    def __post_init__(self):
        self.channel_locks = {c: threading.Lock() for c in CHANNELS}


class SessionRegistry:
    """All live sessions plus lazy loading of persisted ones."""

    def __init__(self, config: ServiceConfig, clock: Optional[Clock] = None):
        self.config = config
        self.clock = clock or wall_clock_ms
        self.store = SessionStore(config.store_root)
        self._sessions: dict[str, LiveSession] = {}
        self._dict_lock = threading.Lock()

    # -- lifecycle -----------------------------------------------------

    def create(self, participant_label: str, seed: Optional[int]) -> LiveSession:
        if seed is None:
            seed = uuid.uuid4().int % (2**31)
        session_id = uuid.uuid4().hex[:12]
        epoch_wall = self.clock()
        state = session.create_session(
            participant_label,
            seed,
            now_ms=0,
            session_id=session_id,
            rest_ms=self.config.rest_ms,
        )
        created_at = datetime.fromtimestamp(epoch_wall / 1000, tz=timezone.utc).isoformat()
        sdir = self.store.create(state, epoch_wall, created_at)
        live = LiveSession(
            state=state,
            meta=sdir.read_metadata(),
            sdir=sdir,
            events_written=len(state.events),
        )
        with self._dict_lock:
            self._sessions[session_id] = live
        return live

    def get(self, session_id: str) -> LiveSession:
        with self._dict_lock:
            live = self._sessions.get(session_id)
        if live is not None:
            return live
        if not self.store.exists(session_id):
            raise KeyError(session_id)
        state, meta = self.store.load_state(session_id)
        live = LiveSession(
            state=state,
            meta=meta,
            sdir=self.store.session_dir(session_id),
            events_written=len(state.events),
        )
        with self._dict_lock:
            return self._sessions.setdefault(session_id, live)

    def now_rel(self, live: LiveSession) -> int:
        return self.clock() - live.meta["epoch_wall_ms"]

    # -- protocol progression -------------------------------------------

    def catch_up(self, live: LiveSession, now: int) -> None:
        """Roll timer-driven progress forward to ``now``.

        Events are stamped at their nominal boundaries, not at request time.
        """
        if live.meta.get("finalized"):
            return
        state = live.state
        while True:
            phase = state.current_phase
            if phase is PhaseKind.DONE:
                break
            if phase in (PhaseKind.BASELINE, PhaseKind.REST):
                deadline = session.phase_deadline(state)
                if now >= deadline:
                    session.advance(state, "timer_expired", deadline)
                    continue
                break
            if session.is_level(phase):
                cfg = quiz.level_config(session.level_id_of(phase))
                if state.live_question is not None:
                    q_deadline = state.live_question.shown_t_ms + cfg.time_limit_ms
                    if now >= q_deadline:
                        session.submit_answer(state, None, q_deadline)
                        continue
                    break
                if state.question_cursor < cfg.question_count:
                    slot = state.phase_started_at + state.question_cursor * cfg.time_limit_ms
                    if now >= slot:
                        session.next_question(state, slot)
                        continue
                    break
                deadline = session.phase_deadline(state)
                if now >= deadline:
                    session.advance(state, "timer_expired", deadline)
                    continue
                break
            if phase is PhaseKind.DEMO:
                limit_ms = quiz.level_config(1).time_limit_ms
                if state.live_question is not None:
                    q_deadline = state.live_question.shown_t_ms + limit_ms
                    if now >= q_deadline:
                        session.submit_answer(state, None, q_deadline)
                        continue
                    break
                if state.question_cursor < session.DEMO_QUESTION_COUNT:
                    shown_t = (
                        state.last_resolved_t
                        if state.last_resolved_t is not None
                        else state.phase_started_at
                    )
                    session.next_question(state, shown_t)
                    continue
                break
            if phase in (PhaseKind.BREAK1, PhaseKind.BREAK2, PhaseKind.BREAK3):
                cap = state.phase_started_at + session.BREAK_CAP_MS
                if now >= cap:
                    session.advance(state, "timer_expired", cap)
                    continue
                break
            break  # consent / instructions wait for the participant

    def flush(self, live: LiveSession) -> None:
        state = live.state
        new_events = state.events[live.events_written:]
        if new_events:
            live.sdir.append_events(new_events)
            live.events_written = len(state.events)
        live.meta["phase"] = state.current_phase.value
        live.meta["score"] = state.score
        if state.done and live.meta.get("finished_t_ms") is None:
            live.meta["finished_t_ms"] = state.last_event_t()
        live.sdir.write_metadata(live.meta)

    # -- scoreboard ------------------------------------------------------

    def scoreboard(self) -> list[quiz.ScoreboardEntry]:
        results = []
        for sid in self.store.session_ids():
            try:
                meta = self.store.session_dir(sid).read_metadata()
            except (OSError, ValueError):
                continue
            if meta.get("phase") == PhaseKind.DONE.value:
                finished = meta.get("finished_t_ms") or 0
                results.append(
                    (
                        meta["participant_label"],
                        int(meta.get("score", 0)),
                        int(meta.get("epoch_wall_ms", 0)) + int(finished),
                    )
                )
        return quiz.scoreboard(results, self.config.scoreboard)


def _http_error(status: int, code: str, message: str) -> HTTPException:
    return HTTPException(status_code=status, detail={"code": code, "message": message})


def build_view(registry: SessionRegistry, live: LiveSession, now: int) -> dict:
    state = live.state
    phase = state.current_phase

    question = None
    next_question_at = None
    if state.live_question is not None:
        q = state.live_question.question
        limit_ms = q.time_limit_s * 1000
        threshold = quiz.hurry_up_threshold_ms(q.time_limit_s)
        remaining = max(0, state.live_question.shown_t_ms + limit_ms - now)
        question = {
            "question_id": q.question_id,
            "cursor": state.live_question.cursor,
            "text": q.rendered_text,
            "shown_t_ms": state.live_question.shown_t_ms,
            "time_limit_ms": limit_ms,
            "remaining_ms": remaining,
            "hurry_up_threshold_ms": threshold,
            "hurry_up_active": remaining <= threshold,
        }
    elif session.is_level(phase):
        cfg = quiz.level_config(session.level_id_of(phase))
        if state.question_cursor < cfg.question_count:
            next_question_at = state.phase_started_at + state.question_cursor * cfg.time_limit_ms

    deadline = session.phase_deadline(state)
    if phase in (PhaseKind.BREAK1, PhaseKind.BREAK2, PhaseKind.BREAK3):
        deadline = state.phase_started_at + session.BREAK_CAP_MS
    phase_remaining = None if deadline is None else max(0, deadline - now)

    continue_enabled = phase in (
        PhaseKind.INSTRUCTIONS, PhaseKind.BREAK1, PhaseKind.BREAK2, PhaseKind.BREAK3,
    ) or (
        phase is PhaseKind.DEMO
        and state.live_question is None
        and state.question_cursor >= session.DEMO_QUESTION_COUNT
    )

    counts = {
        c: int(live.meta.get("channels", {}).get(c, {}).get("count", 0)) for c in CHANNELS
    }
    return {
        "session_id": state.session_id,
        "participant_label": state.participant_label,
        "phase": phase.value,
        "score": state.score,
        "question_cursor": state.question_cursor,
        "server_t_ms": now,
        "phase_started_at_ms": state.phase_started_at,
        "phase_remaining_ms": phase_remaining,
        "question": question,
        "next_question_at_ms": next_question_at,
        "continue_enabled": continue_enabled,
        "consent_required": phase is PhaseKind.CONSENT,
        "media_url": (
            registry.config.media_url or None
            if phase in (PhaseKind.BASELINE, PhaseKind.REST)
            else None
        ),
        "scoreboard": [
            {"display_name": e.display_name, "score": e.score}
            for e in registry.scoreboard()
        ],
        "sample_counts": counts,
        "finalized": bool(live.meta.get("finalized")),
    }


def _apply_step(registry: SessionRegistry, live: LiveSession, req: StepRequest, now: int) -> None:
    state = live.state
    action = req.action
    if action == "consent":
        if state.current_phase is not PhaseKind.CONSENT:
            raise ProtocolViolationError(
                f"consent is not valid during {state.current_phase.value}"
            )
        session.advance(state, "user_action", now)
    elif action == "continue":
        if state.current_phase not in (
            PhaseKind.INSTRUCTIONS, PhaseKind.DEMO,
            PhaseKind.BREAK1, PhaseKind.BREAK2, PhaseKind.BREAK3,
        ):
            raise ProtocolViolationError(
                f"continue is not valid during {state.current_phase.value}"
            )
        session.advance(state, "user_action", now)
    elif action == "answer":
        if req.value is None:
            raise _http_error(422, "missing-value", "answer action requires a value")
        session.submit_answer(state, req.value, now)
    elif action == "timeout":
        if state.live_question is not None:
            q = state.live_question
            deadline = q.shown_t_ms + q.question.time_limit_s * 1000
            if now < deadline:
                raise ProtocolViolationError(
                    f"question live for another {deadline - now} ms",
                    code="question-still-live",
                )
        # otherwise catch-up already applied the timeout; nothing to do
    else:
        raise _http_error(422, "unknown-action", f"unknown action {action!r}")


def _ingest_batch(registry: SessionRegistry, live: LiveSession, batch: SensorBatch) -> dict:
    if batch.session_id and batch.session_id != live.state.session_id:
        raise _http_error(409, "session-mismatch", "batch session_id does not match URL")
    if batch.channel not in CHANNELS:
        raise _http_error(400, "unknown-channel", f"unknown channel {batch.channel!r}")
    if not batch.values:
        raise _http_error(400, "empty-batch", "batch has no samples")
    if batch.sampling_rate_hz <= 0:
        raise _http_error(400, "bad-rate", "sampling_rate_hz must be positive")
    if live.meta.get("finalized"):
        raise _http_error(409, "finalized", "session is finalized and immutable")

    with live.channel_locks[batch.channel]:
        with live.lock:
            channels = live.meta.setdefault("channels", {})
            if live.meta.get("sensor_offset_ms") is None:
                live.meta["sensor_offset_ms"] = (
                    registry.now_rel(live) - batch.first_sample_t_ms
                )
            chan = channels.get(batch.channel)
            if chan is None:
                chan = {
                    "sampling_rate_hz": batch.sampling_rate_hz,
                    "last_t_ms": None,
                    "count": 0,
                }
                channels[batch.channel] = chan
            if chan["sampling_rate_hz"] != batch.sampling_rate_hz:
                raise _http_error(
                    409,
                    "rate-mismatch",
                    f"channel {batch.channel} was opened at "
                    f"{chan['sampling_rate_hz']} Hz",
                )
            if chan["last_t_ms"] is not None and batch.first_sample_t_ms <= chan["last_t_ms"]:
                raise _http_error(
                    409,
                    "non-monotonic",
                    f"batch starts at {batch.first_sample_t_ms} ms but channel "
                    f"already holds samples through {chan['last_t_ms']} ms",
                )
            offset = live.meta["sensor_offset_ms"]

        step = 1000.0 / batch.sampling_rate_hz
        t_source = [batch.first_sample_t_ms + i * step for i in range(len(batch.values))]
        live.sdir.append_samples(
            batch.channel, [t + offset for t in t_source], batch.values
        )

        with live.lock:
            chan["last_t_ms"] = t_source[-1]
            chan["count"] += len(batch.values)
            live.sdir.write_metadata(live.meta)
            total = chan["count"]
    return {"channel": batch.channel, "accepted": len(batch.values), "total": total}


def create_app(config: Optional[ServiceConfig] = None, clock: Optional[Clock] = None) -> FastAPI:
    config = config or ServiceConfig()
    registry = SessionRegistry(config, clock)
    app = FastAPI(title="stressmat")
    app.state.registry = registry

    def _live_or_404(session_id: str) -> LiveSession:
        try:
            return registry.get(session_id)
        except KeyError:
            raise _http_error(404, "unknown-session", f"no session {session_id!r}")

    @app.get("/health")
    def health():
        return {"ok": True, "sessions": len(registry.store.session_ids())}

    @app.post("/sessions", status_code=201)
    def create_session_endpoint(req: CreateSessionRequest):
        live = registry.create(req.participant_label, req.seed)
        with live.lock:
            now = registry.now_rel(live)
            registry.flush(live)
            return build_view(registry, live, now)

    @app.get("/sessions")
    def list_sessions():
        rows = []
        for sid in registry.store.session_ids():
            with registry._dict_lock:
                live = registry._sessions.get(sid)
            if live is not None:
                with live.lock:
                    now = registry.now_rel(live)
                    registry.catch_up(live, now)
                    registry.flush(live)
                    meta = live.meta
                    elapsed = now
            else:
                meta = registry.store.session_dir(sid).read_metadata()
                elapsed = None
            rows.append(
                {
                    "session_id": meta["session_id"],
                    "participant_label": meta["participant_label"],
                    "phase": meta.get("phase"),
                    "score": meta.get("score", 0),
                    "elapsed_ms": elapsed,
                    "finalized": bool(meta.get("finalized")),
                    "sample_counts": {
                        c: int(meta.get("channels", {}).get(c, {}).get("count", 0))
                        for c in CHANNELS
                    },
                }
            )
        return {"sessions": rows}

    @app.get("/sessions/{session_id}/state")
    def get_state(session_id: str):
        live = _live_or_404(session_id)
        with live.lock:
            now = registry.now_rel(live)
            registry.catch_up(live, now)
            registry.flush(live)
            return build_view(registry, live, now)

    @app.post("/sessions/{session_id}/step")
    def step(session_id: str, req: StepRequest):
        live = _live_or_404(session_id)
        with live.lock:
            if live.meta.get("finalized"):
                raise _http_error(409, "finalized", "session is finalized and immutable")
            now = registry.now_rel(live)
            registry.catch_up(live, now)
            try:
                _apply_step(registry, live, req, now)
                registry.catch_up(live, now)
            except ProtocolViolationError as exc:
                registry.flush(live)
                raise _http_error(409, exc.code, str(exc))
            except StressmatError as exc:
                registry.flush(live)
                raise _http_error(409, exc.code, str(exc))
            registry.flush(live)
            return build_view(registry, live, now)

    @app.post("/sessions/{session_id}/sensors")
    def sensors(session_id: str, batch: SensorBatch):
        live = _live_or_404(session_id)
        return _ingest_batch(registry, live, batch)

    @app.websocket("/sessions/{session_id}/stream")
    async def stream(websocket: WebSocket, session_id: str):
        await websocket.accept()
        try:
            live = registry.get(session_id)
        except KeyError:
            await websocket.send_json({"error": "unknown-session"})
            await websocket.close(code=1008)
            return
        try:
            while True:
                payload = await websocket.receive_json()
                try:
                    batch = SensorBatch(**payload)
                    ack = _ingest_batch(registry, live, batch)
                    await websocket.send_json({"ok": True, **ack})
                except HTTPException as exc:
                    await websocket.send_json({"ok": False, **exc.detail})
                except Exception as exc:  # malformed payload
                    await websocket.send_json(
                        {"ok": False, "code": "bad-batch", "message": str(exc)}
                    )
        except WebSocketDisconnect:
            pass

    @app.post("/sessions/{session_id}/finalize")
    def finalize(session_id: str):
        live = _live_or_404(session_id)
        with live.lock:
            if live.meta.get("finalized"):
                return {
                    "session_id": session_id,
                    "report": f"/sessions/{session_id}/report",
                    "already_finalized": True,
                }
            now = registry.now_rel(live)
            registry.catch_up(live, now)
            phase = live.state.current_phase
            if phase not in (PhaseKind.REST, PhaseKind.DONE):
                registry.flush(live)
                raise _http_error(
                    409,
                    "protocol-violation",
                    f"cannot finalize during {phase.value}; session must reach rest",
                )
            live.meta["finalized"] = True
            registry.flush(live)
            return {
                "session_id": session_id,
                "report": f"/sessions/{session_id}/report",
                "already_finalized": False,
            }

    @app.get("/sessions/{session_id}/report")
    def report(session_id: str):
        live = _live_or_404(session_id)
        with live.lock:
            if not live.meta.get("finalized"):
                raise _http_error(409, "not-finalized", "finalize the session first")
            path = live.sdir.path
        try:
            result = phase_report([analyze_session(path)])
        except IncompleteSessionError as exc:
            raise _http_error(409, "incomplete-session", str(exc))
        except CorruptSessionError as exc:
            raise _http_error(422, "corrupt-session", str(exc))
        return PlainTextResponse(result.report_csv(), media_type="text/csv")

    return app
