"""Fully synthetic sessions for end-to-end verification.

Drives the real session state machine through a scripted, well-behaved
participant run, then lays a synthetic ECG over the resulting phase
windows. The written directory uses the exact same formats as a live
session, so the analysis path cannot tell them apart.
"""

from __future__ import annotations

import re
from pathlib import Path

from . import quiz, session
from .ecg import synth_ecg, write_ecg_csv
from .session import PhaseKind
from .storage import SessionDir

# every phase that produces a window needs a target rate
PROFILE_PHASES = tuple(p.value for p in PhaseKind if p is not PhaseKind.DONE)

# scripted participant pacing
_CONSENT_AFTER_MS = 3_000
_INSTRUCTIONS_MS = 8_000
_DEMO_ANSWER_MS = 1_500
_LEVEL_ANSWER_MS = 1_700
_BREAK_MS = 25_000
_SYNTH_WALL_SENTINEL = "1970-01-01T00:00:00Z"


def validate_profile(profile: dict) -> dict[str, float]:
    if not isinstance(profile, dict):
        raise ValueError("profile must be a mapping of phase -> bpm")
    missing = [p for p in PROFILE_PHASES if p not in profile]
    if missing:
        raise ValueError(f"profile missing phases: {', '.join(missing)}")
    unknown = [k for k in profile if k not in PROFILE_PHASES]
    if unknown:
        raise ValueError(f"profile has unknown phases: {', '.join(unknown)}")
    out = {}
    for k in PROFILE_PHASES:
        try:
            out[k] = float(profile[k])
        except (TypeError, ValueError):
            raise ValueError(f"profile[{k!r}] is not a number: {profile[k]!r}") from None
    return out


def scripted_session_state(
    participant_label: str, seed: int, rest_ms: int = session.DEFAULT_REST_MS
) -> session.SessionState:
    """Run one complete nominal session: every question answered correctly."""
    sid = "synth-" + re.sub(r"[^a-z0-9]+", "", participant_label.lower())[:16] + f"-{seed}"
    state = session.create_session(
        participant_label, seed, now_ms=0, session_id=sid, rest_ms=rest_ms
    )
    t = _CONSENT_AFTER_MS
    session.advance(state, "user_action", t)                       # -> baseline
    t += session.BASELINE_MS
    session.advance(state, "timer_expired", t)                     # -> instructions
    t += _INSTRUCTIONS_MS
    session.advance(state, "user_action", t)                       # -> demo

    for _ in range(session.DEMO_QUESTION_COUNT):
        _, q = session.next_question(state, t)
        t += _DEMO_ANSWER_MS
        session.submit_answer(state, q.correct_answer, t)
    t += 1_000
    session.advance(state, "user_action", t)                       # -> level1

    for phase in (PhaseKind.LEVEL1, PhaseKind.LEVEL2, PhaseKind.LEVEL3, PhaseKind.LEVEL4):
        cfg = quiz.level_config(session.level_id_of(phase))
        start = state.phase_started_at
        for i in range(cfg.question_count):
            slot = start + i * cfg.time_limit_ms
            _, q = session.next_question(state, slot)
            session.submit_answer(state, q.correct_answer, slot + _LEVEL_ANSWER_MS)
        t = start + cfg.total_seconds * 1000
        session.advance(state, "timer_expired", t)                 # -> break or rest
        if state.current_phase is not PhaseKind.REST:
            t += _BREAK_MS
            session.advance(state, "user_action", t)               # -> next level
    t += rest_ms
    session.advance(state, "timer_expired", t)                     # -> done
    return state


def write_synthetic_session(
    profile: dict,
    seed: int,
    out_dir,
    participant_label: str = "",
    sampling_rate_hz: float = 250.0,
    noise_snr_db: float | None = 10.0,
) -> Path:
    """Write a complete fake session directory; returns its path."""
    bpm_by_phase = validate_profile(profile)
    out_dir = Path(out_dir)
    if not participant_label:
        participant_label = f"SYN{seed}"

    state = scripted_session_state(participant_label, seed)
    windows = session.phase_windows(state.events)
    phases = [(w.duration_ms, bpm_by_phase[w.phase.value]) for w in windows]
    record, _truth = synth_ecg(
        sampling_rate_hz, phases, noise_snr_db=noise_snr_db, seed=seed,
        start_t_ms=windows[0].start_ms,
    )

    out_dir.mkdir(parents=True, exist_ok=True)
    sdir = SessionDir(out_dir)
    # events are append-only in live use; a rewrite must start clean
    sdir.events_path.unlink(missing_ok=True)
    sdir.channel_path("ecg").unlink(missing_ok=True)
    sdir.write_metadata(
        {
            "session_id": state.session_id,
            "participant_label": state.participant_label,
            "seed": state.seed,
            "rest_ms": state.rest_ms,
            "epoch_wall_ms": 0,
            "created_at": _SYNTH_WALL_SENTINEL,
            "sensor_offset_ms": 0,
            "finalized": True,
            "phase": state.current_phase.value,
            "score": state.score,
            "finished_t_ms": state.last_event_t(),
            "synthetic": True,
        }
    )
    sdir.append_events(state.events)
    write_ecg_csv(sdir.channel_path("ecg"), record)
    return out_dir
