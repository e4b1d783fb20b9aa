"""Study session state machine.

One session walks a fixed phase sequence (consent, baseline, instructions,
demo, four quiz levels with breaks, rest) and appends every observable
moment to an event log. All timestamps are integer milliseconds relative to
the session epoch (session creation); timer-driven transitions are logged at
their exact nominal boundary so phase windows are reproducible.
"""

from __future__ import annotations

import random
import uuid
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

from . import quiz
from .errors import (
    LevelComplete,
    LogIntegrityError,
    ProtocolViolationError,
    TerminalStateError,
)


class PhaseKind(str, Enum):
    CONSENT = "consent"
    BASELINE = "baseline"
    INSTRUCTIONS = "instructions"
    DEMO = "demo"
    LEVEL1 = "level1"
    BREAK1 = "break1"
    LEVEL2 = "level2"
    BREAK2 = "break2"
    LEVEL3 = "level3"
    BREAK3 = "break3"
    LEVEL4 = "level4"
    REST = "rest"
    DONE = "done"


PHASE_ORDER = tuple(PhaseKind)

_LEVEL_IDS = {
    PhaseKind.LEVEL1: 1,
    PhaseKind.LEVEL2: 2,
    PhaseKind.LEVEL3: 3,
    PhaseKind.LEVEL4: 4,
}

# phases ended by the participant (vs. by their timer)
USER_PACED = frozenset(
    {PhaseKind.CONSENT, PhaseKind.INSTRUCTIONS, PhaseKind.DEMO,
     PhaseKind.BREAK1, PhaseKind.BREAK2, PhaseKind.BREAK3}
)

BASELINE_MS = 180_000
DEFAULT_REST_MS = 180_000
BREAK_CAP_MS = 120_000  # breaks auto-advance after this long
DEMO_QUESTION_COUNT = 5


def is_level(phase: PhaseKind) -> bool:
    return phase in _LEVEL_IDS


def level_id_of(phase: PhaseKind) -> int:
    return _LEVEL_IDS[phase]


def next_phase(phase: PhaseKind) -> PhaseKind:
    idx = PHASE_ORDER.index(phase)
    if idx + 1 >= len(PHASE_ORDER):
        raise TerminalStateError("session already finished")
    return PHASE_ORDER[idx + 1]


class EventKind(str, Enum):
    PHASE_START = "phase_start"
    PHASE_END = "phase_end"
    QUESTION_SHOWN = "question_shown"
    HURRY_UP_SHOWN = "hurry_up_shown"
    ANSWER_SUBMITTED = "answer_submitted"
    ANSWER_TIMEOUT = "answer_timeout"
    CONSENT_GIVEN = "consent_given"


@dataclass(frozen=True)
class SessionEvent:
    t_ms: int
    kind: EventKind
    data: dict

    def to_dict(self) -> dict:
        return {"t_ms": self.t_ms, "kind": self.kind.value, "data": self.data}

    @classmethod
    def from_dict(cls, d: dict) -> "SessionEvent":
        return cls(int(d["t_ms"]), EventKind(d["kind"]), d.get("data", {}))


@dataclass(frozen=True)
class PhaseWindow:
    phase: PhaseKind
    start_ms: int
    end_ms: Optional[int]  # None while the phase is still live

    @property
    def is_open(self) -> bool:
        return self.end_ms is None

    @property
    def duration_ms(self) -> Optional[int]:
        return None if self.end_ms is None else self.end_ms - self.start_ms


@dataclass
class LiveQuestion:
    question: quiz.Question
    shown_t_ms: int
    cursor: int  # 0-based index within the phase


@dataclass
class SessionState:
    session_id: str
    participant_label: str
    seed: int
    rest_ms: int
    current_phase: PhaseKind
    phase_started_at: int
    question_cursor: int
    score: int
    rng: random.Random
    events: list[SessionEvent] = field(default_factory=list)
    live_question: Optional[LiveQuestion] = None
    last_resolved_t: Optional[int] = None

    @property
    def done(self) -> bool:
        return self.current_phase is PhaseKind.DONE

    def last_event_t(self) -> int:
        return self.events[-1].t_ms if self.events else 0

    def snapshot(self) -> dict:
        """Immutable view of everything replay must reproduce."""
        return {
            "session_id": self.session_id,
            "participant_label": self.participant_label,
            "seed": self.seed,
            "rest_ms": self.rest_ms,
            "current_phase": self.current_phase.value,
            "phase_started_at": self.phase_started_at,
            "question_cursor": self.question_cursor,
            "score": self.score,
            "rng_state": self.rng.getstate(),
            "events": tuple(e.to_dict().items() for e in self.events),
            "live_question": (
                None
                if self.live_question is None
                else (
                    self.live_question.question.to_record()["question_id"],
                    self.live_question.shown_t_ms,
                    self.live_question.cursor,
                )
            ),
            "last_resolved_t": self.last_resolved_t,
        }

    def _append(self, t_ms: int, kind: EventKind, data: dict) -> None:
        if self.events and t_ms < self.events[-1].t_ms:
            raise LogIntegrityError(
                f"event at {t_ms} ms would precede last event at {self.events[-1].t_ms} ms"
            )
        self.events.append(SessionEvent(t_ms, kind, data))


def create_session(
    participant_label: str,
    seed: int,
    now_ms: int,
    session_id: Optional[str] = None,
    rest_ms: int = DEFAULT_REST_MS,
) -> SessionState:
    """Fresh session in the consent phase."""
    if session_id is None:
        session_id = uuid.uuid4().hex[:12]
    if not participant_label:
        participant_label = f"participant-{session_id[:8]}"
    state = SessionState(
        session_id=session_id,
        participant_label=participant_label,
        seed=seed,
        rest_ms=rest_ms,
        current_phase=PhaseKind.CONSENT,
        phase_started_at=now_ms,
        question_cursor=0,
        score=0,
        rng=random.Random(seed),
    )
    state._append(now_ms, EventKind.PHASE_START, {"phase": PhaseKind.CONSENT.value})
    return state


def phase_duration_ms(state: SessionState, phase: PhaseKind) -> Optional[int]:
    """Nominal duration of a timer-driven phase, None for user-paced ones."""
    if phase is PhaseKind.BASELINE:
        return BASELINE_MS
    if phase is PhaseKind.REST:
        return state.rest_ms
    if is_level(phase):
        return quiz.level_config(level_id_of(phase)).total_seconds * 1000
    return None


def phase_deadline(state: SessionState) -> Optional[int]:
    dur = phase_duration_ms(state, state.current_phase)
    return None if dur is None else state.phase_started_at + dur


def phase_question_count(phase: PhaseKind) -> int:
    if phase is PhaseKind.DEMO:
        return DEMO_QUESTION_COUNT
    if is_level(phase):
        return quiz.level_config(level_id_of(phase)).question_count
    return 0


def advance(state: SessionState, trigger: str, now_ms: int) -> SessionState:
    """Move one step along the phase order.

    User-paced phases end on ``user_action`` (breaks also accept
    ``timer_expired`` once their cap has elapsed); timer phases end on
    ``timer_expired`` at or after their deadline and are logged at the
    exact nominal boundary.
    """
    if trigger not in ("user_action", "timer_expired"):
        raise ValueError(f"unknown trigger {trigger!r}")
    if state.done:
        raise TerminalStateError("session already finished")
    phase = state.current_phase
    if now_ms < state.phase_started_at:
        raise ProtocolViolationError(
            f"now_ms {now_ms} precedes phase start {state.phase_started_at}"
        )
    if state.live_question is not None:
        raise ProtocolViolationError(
            "a question is still live; resolve it before advancing",
            code="question-live",
        )

    if phase in USER_PACED:
        is_break = phase in (PhaseKind.BREAK1, PhaseKind.BREAK2, PhaseKind.BREAK3)
        if trigger == "user_action":
            end_t = now_ms
        elif is_break:
            cap_t = state.phase_started_at + BREAK_CAP_MS
            if now_ms < cap_t:
                raise ProtocolViolationError(
                    f"{phase.value} auto-advances only after {BREAK_CAP_MS} ms"
                )
            end_t = cap_t
        else:
            raise ProtocolViolationError(
                f"{phase.value} ends on participant action, not a timer"
            )
        if phase is PhaseKind.DEMO and state.question_cursor < phase_question_count(phase):
            raise ProtocolViolationError(
                "demo questions are not finished", code="demo-in-progress"
            )
    else:
        if trigger != "timer_expired":
            raise ProtocolViolationError(f"{phase.value} ends on its timer, not user action")
        deadline = phase_deadline(state)
        assert deadline is not None
        if now_ms < deadline:
            raise ProtocolViolationError(
                f"{phase.value} timer expires at {deadline} ms, now is {now_ms} ms"
            )
        end_t = deadline

    if phase is PhaseKind.CONSENT:
        state._append(end_t, EventKind.CONSENT_GIVEN, {})
    state._append(end_t, EventKind.PHASE_END, {"phase": phase.value, "trigger": trigger})
    new_phase = next_phase(phase)
    state.current_phase = new_phase
    state.phase_started_at = end_t
    state.question_cursor = 0
    state.last_resolved_t = None
    if new_phase is not PhaseKind.DONE:
        state._append(end_t, EventKind.PHASE_START, {"phase": new_phase.value})
    return state


def next_question(state: SessionState, now_ms: int) -> tuple[SessionState, quiz.Question]:
    """Generate and show the next question of the current demo/level phase."""
    phase = state.current_phase
    if phase is not PhaseKind.DEMO and not is_level(phase):
        raise ProtocolViolationError(f"no questions in phase {phase.value}")
    if state.live_question is not None:
        raise ProtocolViolationError(
            "previous question is still live", code="question-live"
        )
    count = phase_question_count(phase)
    if state.question_cursor >= count:
        raise LevelComplete(f"all {count} questions of {phase.value} shown")

    config = quiz.level_config(1 if phase is PhaseKind.DEMO else level_id_of(phase))
    question = quiz.generate_question(config, state.rng)
    cursor = state.question_cursor
    state._append(
        now_ms,
        EventKind.QUESTION_SHOWN,
        {"cursor": cursor, "phase": phase.value, "question": question.to_record()},
    )
    state.live_question = LiveQuestion(question, now_ms, cursor)
    state.question_cursor = cursor + 1
    return state, question


def submit_answer(
    state: SessionState, value: Optional[int], now_ms: int
) -> SessionState:
    """Resolve the live question with an answer or (value=None) a timeout.

    Timeouts are logged at the question's exact deadline. If the resolution
    happened past the half-time mark, the hurry-up moment is logged first at
    its exact activation time.
    """
    live = state.live_question
    if live is None:
        raise ProtocolViolationError("no live question", code="no-live-question")
    question = live.question
    limit_ms = question.time_limit_s * 1000
    deadline = live.shown_t_ms + limit_ms

    if value is None:
        if now_ms < deadline:
            raise ProtocolViolationError(
                f"question {question.question_id} times out at {deadline} ms, "
                f"now is {now_ms} ms"
            )
        event_t = deadline
        elapsed = limit_ms
    else:
        event_t = now_ms
        elapsed = now_ms - live.shown_t_ms
        if elapsed < 0:
            raise ProtocolViolationError("answer precedes question display")

    attempt = quiz.check_answer(question, value, elapsed)

    threshold = quiz.hurry_up_threshold_ms(question.time_limit_s)
    hurry_t = live.shown_t_ms + (limit_ms - threshold)
    if elapsed >= limit_ms - threshold:
        state._append(
            hurry_t,
            EventKind.HURRY_UP_SHOWN,
            {"question_id": question.question_id, "remaining_ms": threshold},
        )

    kind = EventKind.ANSWER_TIMEOUT if attempt.timed_out else EventKind.ANSWER_SUBMITTED
    state._append(
        event_t,
        kind,
        {
            "question_id": question.question_id,
            "cursor": live.cursor,
            "phase": state.current_phase.value,
            "submitted_value": attempt.submitted_value,
            "elapsed_ms": attempt.elapsed_ms,
            "correct": attempt.correct,
        },
    )
    if attempt.correct and state.current_phase is not PhaseKind.DEMO:
        state.score += 1
    state.live_question = None
    state.last_resolved_t = event_t
    return state


def phase_windows(events: Sequence[SessionEvent]) -> list[PhaseWindow]:
    """Pair phase_start/phase_end events into ordered, disjoint windows.

    The final window is open (end None) when its phase was still live at the
    end of the log.
    """
    windows: list[PhaseWindow] = []
    open_phase: Optional[tuple[PhaseKind, int]] = None
    last_t = None
    for ev in events:
        if last_t is not None and ev.t_ms < last_t:
            raise LogIntegrityError("event timestamps decrease")
        last_t = ev.t_ms
        if ev.kind is EventKind.PHASE_START:
            if open_phase is not None:
                raise LogIntegrityError(
                    f"phase_start({ev.data.get('phase')}) while "
                    f"{open_phase[0].value} is still open"
                )
            open_phase = (PhaseKind(ev.data["phase"]), ev.t_ms)
        elif ev.kind is EventKind.PHASE_END:
            if open_phase is None:
                raise LogIntegrityError(
                    f"phase_end({ev.data.get('phase')}) without a matching phase_start"
                )
            phase, start = open_phase
            if ev.data.get("phase") != phase.value:
                raise LogIntegrityError(
                    f"phase_end({ev.data.get('phase')}) does not match open "
                    f"phase {phase.value}"
                )
            if ev.t_ms < start:
                raise LogIntegrityError("phase ends before it starts")
            windows.append(PhaseWindow(phase, start, ev.t_ms))
            open_phase = None
    if open_phase is not None:
        windows.append(PhaseWindow(open_phase[0], open_phase[1], None))
    return windows


def replay(
    events: Sequence[SessionEvent],
    participant_label: str,
    seed: int,
    session_id: str,
    rest_ms: int = DEFAULT_REST_MS,
) -> SessionState:
    """Rebuild a session by re-running every command recorded in its log.

    Questions are regenerated from the seed and checked against the logged
    records, so any divergence surfaces as a LogIntegrityError.
    """
    if not events or events[0].kind is not EventKind.PHASE_START:
        raise LogIntegrityError("log must begin with the first phase_start")
    state = create_session(
        participant_label,
        seed,
        events[0].t_ms,
        session_id=session_id,
        rest_ms=rest_ms,
    )
    for ev in events[1:]:
        if ev.kind is EventKind.PHASE_END:
            advance(state, ev.data["trigger"], ev.t_ms)
        elif ev.kind is EventKind.QUESTION_SHOWN:
            _, question = next_question(state, ev.t_ms)
            if question.to_record() != ev.data["question"]:
                raise LogIntegrityError(
                    f"regenerated question {question.question_id} does not match "
                    f"the logged record at {ev.t_ms} ms"
                )
        elif ev.kind is EventKind.ANSWER_SUBMITTED:
            submit_answer(state, ev.data["submitted_value"], ev.t_ms)
        elif ev.kind is EventKind.ANSWER_TIMEOUT:
            submit_answer(state, None, ev.t_ms)
        # phase_start, hurry_up_shown and consent_given are emitted by the
        # commands above; replay just verifies they match.
    _verify_log_match(state.events, events)
    return state


def _verify_log_match(rebuilt: Sequence[SessionEvent], original: Sequence[SessionEvent]) -> None:
    if len(rebuilt) != len(original):
        raise LogIntegrityError(
            f"replay produced {len(rebuilt)} events, log has {len(original)}"
        )
    for a, b in zip(rebuilt, original):
        if a.to_dict() != b.to_dict():
            raise LogIntegrityError(f"replayed event {a.to_dict()} != logged {b.to_dict()}")


def recount_score(events: Sequence[SessionEvent]) -> int:
    """Independent score recount: correct answers outside the demo phase."""
    total = 0
    current = None
    for ev in events:
        if ev.kind is EventKind.PHASE_START:
            current = ev.data["phase"]
        elif ev.kind is EventKind.ANSWER_SUBMITTED:
            if ev.data.get("correct") and current != PhaseKind.DEMO.value:
                total += 1
    return total
