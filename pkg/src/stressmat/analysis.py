"""Per-phase heart-rate analysis of stored sessions.

Turns a session directory (event log + ECG file) into per-phase HR
statistics, and aggregates several sessions into a study report: the
headline table averages participant phase means without weighting.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .ecg import detect_r_peaks, hr_series, read_ecg_csv, segment_and_aggregate
from .ecg.rate import PhaseHrStats
from .errors import StressmatError
from .session import PhaseKind, phase_windows
from .storage import SessionDir

# headline phases, protocol order; demo/breaks stay in the raw plot data only
REPORT_PHASES = (
    PhaseKind.BASELINE,
    PhaseKind.LEVEL1,
    PhaseKind.LEVEL2,
    PhaseKind.LEVEL3,
    PhaseKind.LEVEL4,
    PhaseKind.REST,
)


class CorruptSessionError(StressmatError):
    code = "corrupt-session"


class IncompleteSessionError(StressmatError):
    """Session has an open phase window and cannot be segmented yet."""

    code = "incomplete-session"


@dataclass
class SessionAnalysis:
    session_id: str
    participant_label: str
    stats: list[PhaseHrStats]  # one row per closed window, protocol order

    def stat_for(self, phase: PhaseKind) -> Optional[PhaseHrStats]:
        for s in self.stats:
            if s.phase is phase:
                return s
        return None


def analyze_session(session_dir) -> SessionAnalysis:
    """Detect beats in a stored session and aggregate HR per phase window."""
    sdir = SessionDir(Path(session_dir))
    if not sdir.metadata_path.exists():
        raise CorruptSessionError(f"{sdir.path}: missing {sdir.metadata_path.name}")
    if not sdir.events_path.exists():
        raise CorruptSessionError(f"{sdir.path}: missing {sdir.events_path.name}")
    ecg_path = sdir.channel_path("ecg")
    if not ecg_path.exists():
        raise CorruptSessionError(f"{sdir.path}: missing {ecg_path.name}")

    meta = sdir.read_metadata()
    try:
        events = sdir.read_events()
        windows = phase_windows(events)
    except (StressmatError, ValueError, KeyError) as exc:
        raise CorruptSessionError(f"{sdir.path}: bad event log ({exc})") from exc
    if not windows:
        raise CorruptSessionError(f"{sdir.path}: event log has no phases")
    if any(w.is_open for w in windows):
        raise IncompleteSessionError(
            f"{sdir.path}: phase {windows[-1].phase.value} window is still open"
        )

    try:
        record = read_ecg_csv(ecg_path)
    except StressmatError as exc:
        raise CorruptSessionError(f"{sdir.path}: {exc}") from exc

    peaks = detect_r_peaks(record)
    if len(peaks) < 2:
        raise CorruptSessionError(f"{sdir.path}: fewer than two beats detected")
    hr = hr_series(record, peaks)
    stats = segment_and_aggregate(hr, windows)
    return SessionAnalysis(
        session_id=meta["session_id"],
        participant_label=meta["participant_label"],
        stats=stats,
    )


@dataclass(frozen=True)
class OverallPhaseRow:
    phase: PhaseKind
    mean_bpm: Optional[float]   # unweighted mean of participant phase means
    sd_bpm: Optional[float]     # spread of participant means (needs >= 2)
    n_sessions: int
    n_beats: int


@dataclass
class PhaseReport:
    sessions: list[SessionAnalysis]
    overall: list[OverallPhaseRow]

    def report_csv(self) -> str:
        lines = ["phase,mean_bpm,sd_bpm,n_sessions,n_beats"]
        for row in self.overall:
            lines.append(
                f"{row.phase.value},{_fmt(row.mean_bpm)},{_fmt(row.sd_bpm)},"
                f"{row.n_sessions},{row.n_beats}"
            )
        return "\n".join(lines) + "\n"

    def plot_data_csv(self) -> str:
        """Raw per-participant values for every phase window (all phases)."""
        lines = ["participant,phase,mean_bpm,sd_bpm,n_beats"]
        for sa in self.sessions:
            for s in sa.stats:
                lines.append(
                    f"{sa.participant_label},{s.phase.value},"
                    f"{_fmt(s.mean_bpm)},{_fmt(s.sd_bpm)},{s.n_beats}"
                )
        return "\n".join(lines) + "\n"


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.6f}"


def phase_report(analyses: Sequence[SessionAnalysis]) -> PhaseReport:
    """Aggregate per-session stats into the headline per-phase table."""
    sessions = sorted(analyses, key=lambda a: (a.participant_label, a.session_id))
    overall = []
    for phase in REPORT_PHASES:
        means = []
        beats = 0
        for sa in sessions:
            stat = sa.stat_for(phase)
            if stat is None:
                continue
            beats += stat.n_beats
            if stat.mean_bpm is not None:
                means.append(stat.mean_bpm)
        mean = float(np.mean(means)) if means else None
        sd = float(np.std(means, ddof=1)) if len(means) >= 2 else None
        overall.append(OverallPhaseRow(phase, mean, sd, len(means), beats))
    return PhaseReport(sessions=sessions, overall=overall)


def report_for_dirs(session_dirs: Sequence) -> PhaseReport:
    return phase_report([analyze_session(d) for d in session_dirs])
