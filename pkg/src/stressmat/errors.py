"""Exception types shared across the package.

Protocol errors carry a short machine-readable ``code`` so the HTTP layer
can map them to structured error responses.
"""


class StressmatError(Exception):
    """Base class for errors raised by this package."""

    code = "error"


class InvalidLevelError(StressmatError, ValueError):
    code = "invalid-level"


class InexactDivisionError(StressmatError, ArithmeticError):
    """A division step did not produce an integer quotient."""

    code = "inexact-division"


class LateSubmissionError(StressmatError):
    """An answer arrived after the question's time limit."""

    code = "late-submission"


class ProtocolViolationError(StressmatError):
    """A trigger or command that is illegal in the current phase."""

    code = "protocol-violation"

    def __init__(self, message, code=None):
        super().__init__(message)
        if code is not None:
            self.code = code


class TerminalStateError(ProtocolViolationError):
    """Command issued on a session that already reached its final phase."""

    code = "terminal-state"


class LevelComplete(StressmatError):
    """Signal (not a failure): the current phase has no questions left."""

    code = "level-complete"


class LogIntegrityError(StressmatError):
    """The event log is internally inconsistent and cannot be trusted."""

    code = "log-integrity"


class InvalidBandError(StressmatError, ValueError):
    code = "invalid-band"


class RecordTooShortError(StressmatError, ValueError):
    code = "record-too-short"


class InsufficientBeatsError(StressmatError, ValueError):
    code = "insufficient-beats"


class InvalidWindowsError(StressmatError, ValueError):
    code = "invalid-windows"


class SignalFormatError(StressmatError, ValueError):
    """A stored signal file violates the expected uniform-grid format."""

    code = "signal-format"
