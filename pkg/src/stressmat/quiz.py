"""Mental arithmetic quiz engine.

Four difficulty levels of timed integer arithmetic. Question generation is
deterministic given an externally owned ``random.Random`` instance, so a
session can be replayed bit-for-bit from its seed.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence

from .errors import (
    InexactDivisionError,
    InvalidLevelError,
    LateSubmissionError,
)

log = logging.getLogger(__name__)


class Operator(Enum):
    ADD = "+"
    SUB = "-"
    MUL = "*"
    DIV = "/"

    @property
    def symbol(self) -> str:
        return self.value

    @classmethod
    def from_symbol(cls, symbol: str) -> "Operator":
        return cls(symbol)


@dataclass(frozen=True)
class LevelConfig:
    level_id: int
    operand_count: int
    # kept as an ordered tuple (not a set) so sampling order is deterministic
    allowed_operators: tuple[Operator, ...]
    question_count: int
    seconds_per_question: int

    @property
    def total_seconds(self) -> int:
        return self.question_count * self.seconds_per_question

    @property
    def time_limit_ms(self) -> int:
        return self.seconds_per_question * 1000


_LEVELS = {
    1: LevelConfig(1, 2, (Operator.ADD, Operator.SUB), 30, 4),
    2: LevelConfig(2, 3, (Operator.ADD, Operator.SUB, Operator.MUL), 30, 4),
    3: LevelConfig(3, 4, (Operator.ADD, Operator.SUB, Operator.MUL), 30, 5),
    4: LevelConfig(4, 4, (Operator.ADD, Operator.SUB, Operator.MUL, Operator.DIV), 30, 5),
}

# Operand sampling ranges per level. Division rewrites the dividend as
# divisor * quotient so every "/" step is exact by construction.
_OPERAND_RANGE = {1: (1, 20), 2: (1, 12), 3: (1, 25), 4: (1, 25)}
_MUL_OPERAND_CAP = {3: 12}
_DIV_DIVISOR_RANGE = (2, 9)
_DIV_QUOTIENT_RANGE = (2, 25)

# Generated answers and tier intermediates must stay inside this window;
# final answers must additionally be non-negative.
_VALUE_BOUND = 999
_NONNEGATIVE_RETRY_CAP = 1000


@dataclass(frozen=True)
class Question:
    question_id: str
    level_id: int
    operands: tuple[int, ...]
    operators: tuple[Operator, ...]
    rendered_text: str
    correct_answer: int
    time_limit_s: int

    def to_record(self) -> dict:
        """Plain-data form used in the event log."""
        return {
            "question_id": self.question_id,
            "level_id": self.level_id,
            "operands": list(self.operands),
            "operators": [op.symbol for op in self.operators],
            "text": self.rendered_text,
            "correct_answer": self.correct_answer,
            "time_limit_s": self.time_limit_s,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Question":
        return cls(
            question_id=rec["question_id"],
            level_id=rec["level_id"],
            operands=tuple(rec["operands"]),
            operators=tuple(Operator.from_symbol(s) for s in rec["operators"]),
            rendered_text=rec["text"],
            correct_answer=rec["correct_answer"],
            time_limit_s=rec["time_limit_s"],
        )


@dataclass(frozen=True)
class Attempt:
    question_id: str
    submitted_value: Optional[int]
    elapsed_ms: int
    correct: bool

    @property
    def timed_out(self) -> bool:
        return self.submitted_value is None


@dataclass(frozen=True)
class ScoreboardEntry:
    display_name: str
    score: int


def level_config(level_id: int) -> LevelConfig:
    """Fixed per-level generation and timing parameters."""
    try:
        return _LEVELS[level_id]
    except (KeyError, TypeError):
        raise InvalidLevelError(f"level_id must be 1..4, got {level_id!r}") from None


def evaluate_expression(operands: Sequence[int], operators: Sequence[Operator]) -> int:
    """Evaluate under standard precedence: * and / bind before + and -,
    left to right within each tier. Division must be exact.
    """
    value, _ = _evaluate_with_intermediates(operands, operators)
    return value


def _evaluate_with_intermediates(
    operands: Sequence[int], operators: Sequence[Operator]
) -> tuple[int, list[int]]:
    if len(operators) != len(operands) - 1 or not operands:
        raise ValueError(
            f"expected len(operators) == len(operands) - 1, "
            f"got {len(operators)} operators for {len(operands)} operands"
        )
    intermediates: list[int] = []

    # tier 1: collapse * and / runs left to right
    values = [int(operands[0])]
    for op, rhs in zip(operators, operands[1:]):
        rhs = int(rhs)
        if op is Operator.MUL:
            values[-1] *= rhs
            intermediates.append(values[-1])
        elif op is Operator.DIV:
            if rhs == 0:
                raise ZeroDivisionError("division by zero")
            if values[-1] % rhs != 0:
                raise InexactDivisionError(f"{values[-1]} / {rhs} is not an integer")
            values[-1] //= rhs
            intermediates.append(values[-1])
        else:
            values.append(rhs)

    # tier 2: fold + and - left to right
    add_sub = [op for op in operators if op in (Operator.ADD, Operator.SUB)]
    total = values[0]
    for op, rhs in zip(add_sub, values[1:]):
        total = total + rhs if op is Operator.ADD else total - rhs
        intermediates.append(total)
    return total, intermediates


def render_text(operands: Sequence[int], operators: Sequence[Operator]) -> str:
    parts = [str(operands[0])]
    for op, rhs in zip(operators, operands[1:]):
        parts.append(op.symbol)
        parts.append(str(rhs))
    return " ".join(parts)


def generate_question(config: LevelConfig, rng: random.Random) -> Question:
    """Generate one question for the given level.

    Rejection-samples until the answer and every tier intermediate fit the
    value bounds and the final answer is non-negative; after a hard retry cap
    the non-negativity constraint is relaxed so generation always terminates.
    """
    question_id = f"q{config.level_id}-{rng.getrandbits(48):012x}"
    lo, hi = _OPERAND_RANGE[config.level_id]
    mul_cap = _MUL_OPERAND_CAP.get(config.level_id)

    attempts = 0
    require_nonnegative = True
    while True:
        attempts += 1
        if require_nonnegative and attempts > _NONNEGATIVE_RETRY_CAP:
            require_nonnegative = False
            log.warning(
                "question %s: retry cap reached, relaxing non-negative constraint",
                question_id,
            )
        operators = tuple(
            rng.choice(config.allowed_operators) for _ in range(config.operand_count - 1)
        )
        operands = []
        for j in range(config.operand_count):
            cap = hi
            if mul_cap is not None and _adjacent_to(operators, j, Operator.MUL):
                cap = min(cap, mul_cap)
            operands.append(rng.randint(lo, cap))
        # seed exact divisions: dividend = divisor * quotient
        for i, op in enumerate(operators):
            if op is Operator.DIV:
                divisor = rng.randint(*_DIV_DIVISOR_RANGE)
                quotient = rng.randint(*_DIV_QUOTIENT_RANGE)
                operands[i + 1] = divisor
                operands[i] = divisor * quotient
        try:
            answer, intermediates = _evaluate_with_intermediates(operands, operators)
        except (ZeroDivisionError, InexactDivisionError):
            continue
        if any(abs(v) > _VALUE_BOUND for v in intermediates) or abs(answer) > _VALUE_BOUND:
            continue
        if require_nonnegative and answer < 0:
            continue
        operands_t = tuple(operands)
        return Question(
            question_id=question_id,
            level_id=config.level_id,
            operands=operands_t,
            operators=operators,
            rendered_text=render_text(operands_t, operators),
            correct_answer=answer,
            time_limit_s=config.seconds_per_question,
        )


def _adjacent_to(operators: Sequence[Operator], operand_idx: int, kind: Operator) -> bool:
    left = operand_idx - 1
    if 0 <= left < len(operators) and operators[left] is kind:
        return True
    return operand_idx < len(operators) and operators[operand_idx] is kind


def check_answer(
    question: Question, submitted_value: Optional[int], elapsed_ms: int
) -> Attempt:
    """Judge one submission. Absent value means the question timed out."""
    if elapsed_ms < 0:
        raise ValueError(f"elapsed_ms must be >= 0, got {elapsed_ms}")
    limit_ms = question.time_limit_s * 1000
    if submitted_value is None:
        return Attempt(question.question_id, None, min(elapsed_ms, limit_ms), False)
    if elapsed_ms > limit_ms:
        raise LateSubmissionError(
            f"answer for {question.question_id} arrived at {elapsed_ms} ms "
            f"(limit {limit_ms} ms); caller should have timed out"
        )
    correct = int(submitted_value) == question.correct_answer
    return Attempt(question.question_id, int(submitted_value), elapsed_ms, correct)


def parse_answer(text: str) -> Optional[int]:
    """Parse user input as a signed decimal integer; None if not parseable."""
    try:
        return int(text.strip())
    except (ValueError, AttributeError):
        return None


def hurry_up_threshold_ms(time_limit_s: int) -> int:
    """Remaining time at which the hurry-up indicator activates: half the limit."""
    if time_limit_s <= 0:
        raise ValueError(f"time_limit_s must be positive, got {time_limit_s}")
    return time_limit_s * 1000 // 2


DEFAULT_DUMMY_ENTRIES = (
    ScoreboardEntry("Aarav K.", 96),
    ScoreboardEntry("Priya S.", 88),
    ScoreboardEntry("Rohit M.", 77),
    ScoreboardEntry("Sneha T.", 63),
    ScoreboardEntry("Vikram J.", 51),
)

SCOREBOARD_SIZE = 5


def scoreboard(
    results: Iterable[tuple[str, int, int]],
    dummies: Sequence[ScoreboardEntry] = DEFAULT_DUMMY_ENTRIES,
) -> list[ScoreboardEntry]:
    """Top-five board mixing real results with configured dummy entries.

    ``results`` are (display_name, score, finished_at_ms) tuples. Ties break
    toward the earlier completion; dummy entries predate every real result.
    """
    candidates: list[tuple[int, int, int, str]] = []
    for pos, entry in enumerate(dummies):
        candidates.append((-entry.score, -1, pos, entry.display_name))
    for name, score, finished_at_ms in results:
        candidates.append((-int(score), int(finished_at_ms), 0, name))
    candidates.sort(key=lambda c: (c[0], c[1], c[2], c[3]))
    return [
        ScoreboardEntry(name, -neg_score)
        for neg_score, _, _, name in candidates[:SCOREBOARD_SIZE]
    ]
