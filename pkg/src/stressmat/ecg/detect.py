"""R-peak detection.

Classic Pan-Tompkins-style chain: QRS band-pass (5-15 Hz), differentiation,
squaring, 150 ms moving-window integration, then adaptive dual thresholds
with a 200 ms refractory period and a search-back pass for missed beats.
Detected peaks are refined to the local maximum of the band-passed signal
within +-50 ms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from .filters import design_bandpass
from .record import EcgRecord

QRS_BAND_HZ = (5.0, 15.0)
QRS_FILTER_ORDER = 4
INTEGRATION_WINDOW_S = 0.150
REFRACTORY_S = 0.200
REFINE_WINDOW_S = 0.050
SEARCHBACK_FACTOR = 1.66
MIN_RECORD_S = 10.0
MIN_SAMPLING_RATE_HZ = 100.0


@dataclass
class RPeakSeries:
    peak_indices: np.ndarray  # strictly increasing sample indices

    def __post_init__(self):
        self.peak_indices = np.asarray(self.peak_indices, dtype=np.int64)
        if self.peak_indices.size > 1 and np.any(np.diff(self.peak_indices) <= 0):
            raise ValueError("peak indices must be strictly increasing")

    def __len__(self) -> int:
        return self.peak_indices.size

    def times_ms(self, record: EcgRecord) -> np.ndarray:
        return record.t_ms(self.peak_indices)


def qrs_emphasis(record: EcgRecord) -> np.ndarray:
    """Zero-phase 5-15 Hz filtering that isolates QRS energy."""
    sos = design_bandpass(QRS_BAND_HZ[0], QRS_BAND_HZ[1],
                          record.sampling_rate_hz, order=QRS_FILTER_ORDER)
    return signal.sosfiltfilt(sos, record.samples)


def detect_r_peaks(record: EcgRecord) -> RPeakSeries:
    """Locate R peaks in a raw ECG record.

    Returns an empty series when nothing crosses the thresholds (flatline);
    raises on records too short or too slowly sampled to analyze.
    """
    fs = record.sampling_rate_hz
    if fs < MIN_SAMPLING_RATE_HZ:
        raise ValueError(
            f"sampling rate {fs} Hz is below the {MIN_SAMPLING_RATE_HZ} Hz minimum"
        )
    if record.duration_s < MIN_RECORD_S:
        raise ValueError(
            f"record is {record.duration_s:.2f} s, need >= {MIN_RECORD_S} s"
        )

    filtered = qrs_emphasis(record)
    derivative = np.gradient(filtered) * fs
    squared = derivative * derivative
    win = max(1, int(round(INTEGRATION_WINDOW_S * fs)))
    integrated = np.convolve(squared, np.ones(win) / win, mode="same")

    refractory = int(round(REFRACTORY_S * fs))
    candidates, _ = signal.find_peaks(integrated, distance=refractory)
    if candidates.size == 0:
        return RPeakSeries(np.empty(0, dtype=np.int64))

    accepted = _adaptive_thresholds(integrated, candidates, fs, refractory)
    if not accepted:
        return RPeakSeries(np.empty(0, dtype=np.int64))
    refined = _refine_to_filtered_peak(filtered, accepted, fs)
    return RPeakSeries(_enforce_refractory(filtered, refined, refractory))


def _adaptive_thresholds(integrated, candidates, fs, refractory) -> list[int]:
    head = integrated[: int(2.0 * fs)]
    spki = 0.25 * float(np.max(head))
    npki = 0.5 * float(np.mean(head))
    threshold = npki + 0.25 * (spki - npki)

    accepted: list[int] = []
    rr_history: list[int] = []
    last = None
    for c in candidates:
        value = integrated[c]
        if value > threshold and (last is None or c - last >= refractory):
            if last is not None:
                rr_history.append(c - last)
                rr_history = rr_history[-8:]
            accepted.append(int(c))
            last = int(c)
            spki = 0.125 * value + 0.875 * spki
        else:
            if last is not None and rr_history:
                rr_avg = float(np.mean(rr_history))
                if c - last > SEARCHBACK_FACTOR * rr_avg:
                    missed = [
                        int(j) for j in candidates
                        if last + refractory <= j < c and integrated[j] > 0.5 * threshold
                    ]
                    if missed:
                        best = max(missed, key=lambda j: integrated[j])
                        rr_history.append(best - last)
                        rr_history = rr_history[-8:]
                        accepted.append(best)
                        last = best
                        spki = 0.25 * integrated[best] + 0.75 * spki
            npki = 0.125 * value + 0.875 * npki
        threshold = npki + 0.25 * (spki - npki)
    return accepted


def _refine_to_filtered_peak(filtered, accepted, fs) -> list[int]:
    half = int(round(REFINE_WINDOW_S * fs))
    refined = []
    for c in sorted(accepted):
        lo = max(0, c - half)
        hi = min(len(filtered), c + half + 1)
        refined.append(lo + int(np.argmax(filtered[lo:hi])))
    return refined


def _enforce_refractory(filtered, refined, refractory) -> np.ndarray:
    out: list[int] = []
    for idx in sorted(set(refined)):
        if out and idx - out[-1] < refractory:
            if filtered[idx] > filtered[out[-1]]:
                out[-1] = idx
        else:
            out.append(idx)
    return np.asarray(out, dtype=np.int64)


def match_peaks(detected_ms: np.ndarray, truth_ms: np.ndarray,
                tolerance_ms: float = 50.0) -> tuple[int, int, int]:
    """Greedy one-to-one matching; returns (true pos, false pos, false neg)."""
    truth_ms = np.asarray(truth_ms, dtype=float)
    used = np.zeros(truth_ms.size, dtype=bool)
    tp = 0
    for d in np.asarray(detected_ms, dtype=float):
        j = int(np.searchsorted(truth_ms, d))
        best = None
        for k in (j - 1, j, j + 1):
            if 0 <= k < truth_ms.size and not used[k] and abs(truth_ms[k] - d) <= tolerance_ms:
                if best is None or abs(truth_ms[k] - d) < abs(truth_ms[best] - d):
                    best = k
        if best is not None:
            used[best] = True
            tp += 1
    return tp, int(detected_ms.size - tp), int(truth_ms.size - tp)
