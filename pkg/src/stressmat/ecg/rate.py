"""Beat intervals, instantaneous heart rate, and per-phase aggregation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..errors import InsufficientBeatsError, InvalidWindowsError
from ..session import PhaseKind, PhaseWindow
from .detect import RPeakSeries
from .record import EcgRecord

# RR intervals outside this window are artifacts, not beats
RR_BOUNDS_MS = (240.0, 3000.0)


@dataclass
class RrIntervals:
    rr_ms: np.ndarray          # kept intervals, ms
    n_artifacts: int           # intervals dropped by the bounds rule
    end_beat_idx: np.ndarray   # index (into the peak series) closing each interval


@dataclass
class HrSeries:
    """Instantaneous heart rate per beat interval.

    ``beat_t_ms`` stamps every detected beat; ``bpm[i]`` is the rate of the
    interval ending at ``bpm_t_ms[i]``. Without artifacts,
    len(bpm) == len(beat_t_ms) - 1.
    """

    beat_t_ms: np.ndarray
    bpm: np.ndarray
    bpm_t_ms: np.ndarray
    n_artifacts: int = 0


@dataclass(frozen=True)
class PhaseHrStats:
    phase: PhaseKind
    mean_bpm: Optional[float]
    sd_bpm: Optional[float]
    n_beats: int


def rr_intervals(peaks: RPeakSeries, sampling_rate_hz: float) -> RrIntervals:
    """Successive peak distances in ms, with out-of-bounds intervals dropped."""
    if len(peaks) < 2:
        raise InsufficientBeatsError(
            f"need at least 2 peaks to form an interval, got {len(peaks)}"
        )
    rr = np.diff(peaks.peak_indices) * (1000.0 / sampling_rate_hz)
    keep = (rr >= RR_BOUNDS_MS[0]) & (rr <= RR_BOUNDS_MS[1])
    return RrIntervals(
        rr_ms=rr[keep],
        n_artifacts=int(np.count_nonzero(~keep)),
        end_beat_idx=np.nonzero(keep)[0] + 1,
    )


def hr_from_rr(rr_ms: Sequence[float]) -> np.ndarray:
    """Instantaneous rate per interval: bpm = 60000 / rr."""
    rr = np.asarray(rr_ms, dtype=np.float64)
    if rr.size == 0:
        return np.empty(0, dtype=np.float64)
    return 60000.0 / rr


def hr_series(record: EcgRecord, peaks: RPeakSeries) -> HrSeries:
    """Full beat-time/bpm series for a record's detected peaks."""
    beat_t = peaks.times_ms(record)
    rr = rr_intervals(peaks, record.sampling_rate_hz)
    return HrSeries(
        beat_t_ms=beat_t,
        bpm=hr_from_rr(rr.rr_ms),
        bpm_t_ms=beat_t[rr.end_beat_idx],
        n_artifacts=rr.n_artifacts,
    )


def segment_and_aggregate(
    hr: HrSeries, windows: Sequence[PhaseWindow]
) -> list[PhaseHrStats]:
    """Per-window mean/SD of the bpm samples falling inside each window.

    A bpm sample belongs to the window containing its interval-closing beat
    (start inclusive, end exclusive); samples outside every window are
    ignored. Mean and SD are absent for windows with fewer than two beats.
    """
    _check_windows(windows)
    stats = []
    for w in windows:
        inside = (hr.bpm_t_ms >= w.start_ms) & (hr.bpm_t_ms < w.end_ms)
        values = hr.bpm[inside]
        n = int(values.size)
        if n < 2:
            stats.append(PhaseHrStats(w.phase, None, None, n))
        else:
            stats.append(
                PhaseHrStats(
                    w.phase,
                    float(np.mean(values)),
                    float(np.std(values, ddof=1)),
                    n,
                )
            )
    return stats


def _check_windows(windows: Sequence[PhaseWindow]) -> None:
    prev_end = None
    for w in windows:
        if w.end_ms is None:
            raise InvalidWindowsError(
                f"window {w.phase.value} is still open; aggregate closed windows only"
            )
        if w.end_ms <= w.start_ms:
            raise InvalidWindowsError(f"window {w.phase.value} is empty or reversed")
        if prev_end is not None and w.start_ms < prev_end:
            raise InvalidWindowsError(
                f"window {w.phase.value} overlaps the previous window"
            )
        prev_end = w.end_ms
