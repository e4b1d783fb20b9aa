"""Synthetic ECG with exact ground-truth beat times.

Each beat is a stylized P-QRS-T complex built from Gaussian bumps, placed on
an RR walk with small seeded jitter. Because the generator knows every R
sample index exactly, it doubles as the verification oracle for the
detection pipeline (pilot recordings of real subjects are not reproducible).
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .record import EcgRecord

# (amplitude mV, center offset s relative to R, gaussian width s)
BEAT_WAVES = (
    (0.15, -0.200, 0.025),   # P
    (-0.10, -0.028, 0.010),  # Q
    (1.00, 0.000, 0.012),    # R
    (-0.18, 0.030, 0.010),   # S
    (0.35, 0.250, 0.045),    # T
)

RR_JITTER_SD_S = 0.010
BPM_RANGE = (30.0, 200.0)
_MIN_RR_S = 0.250


def synth_ecg(
    sampling_rate_hz: float,
    phases: Sequence[tuple[float, float]],
    noise_snr_db: Optional[float] = None,
    seed: int = 0,
    start_t_ms: int = 0,
) -> tuple[EcgRecord, np.ndarray]:
    """Generate a record from (duration_ms, target_bpm) segments.

    Returns the record and the ground-truth R sample indices. Optional
    additive white Gaussian noise at the given SNR (dB, relative to the
    clean signal power).
    """
    if not phases:
        raise ValueError("need at least one (duration_ms, bpm) phase")
    for duration_ms, bpm in phases:
        if duration_ms <= 0:
            raise ValueError(f"phase duration must be positive, got {duration_ms}")
        if not (BPM_RANGE[0] < bpm < BPM_RANGE[1]):
            raise ValueError(
                f"target bpm {bpm} outside supported range {BPM_RANGE}"
            )
    if sampling_rate_hz <= 0:
        raise ValueError("sampling_rate_hz must be positive")

    rng = np.random.default_rng(seed)
    durations_s = np.array([d for d, _ in phases], dtype=float) / 1000.0
    bounds_s = np.concatenate([[0.0], np.cumsum(durations_s)])
    total_s = bounds_s[-1]
    n = int(round(total_s * sampling_rate_hz))

    def bpm_at(t_s: float) -> float:
        i = int(np.searchsorted(bounds_s, t_s, side="right")) - 1
        return phases[min(max(i, 0), len(phases) - 1)][1]

    # RR walk; first beat half an interval in so a round minute holds a
    # round number of beats
    r_times: list[float] = []
    t = (60.0 / bpm_at(0.0)) / 2.0
    while t < total_s:
        r_times.append(t)
        rr = 60.0 / bpm_at(t) + rng.normal(0.0, RR_JITTER_SD_S)
        t += max(rr, _MIN_RR_S)

    time_s = np.arange(n) / sampling_rate_hz
    samples = np.zeros(n)
    for rt in r_times:
        for amp, offset, width in BEAT_WAVES:
            center = rt + offset
            lo = max(0, int((center - 5 * width) * sampling_rate_hz))
            hi = min(n, int((center + 5 * width) * sampling_rate_hz) + 1)
            if hi <= lo:
                continue
            tt = time_s[lo:hi]
            samples[lo:hi] += amp * np.exp(-0.5 * ((tt - center) / width) ** 2)

    truth = np.round(np.array(r_times) * sampling_rate_hz).astype(np.int64)
    truth = truth[truth < n]

    if noise_snr_db is not None:
        power = float(np.mean(samples**2))
        noise_sd = np.sqrt(power / 10.0 ** (noise_snr_db / 10.0))
        samples = samples + rng.normal(0.0, noise_sd, n)

    record = EcgRecord(
        sampling_rate_hz=sampling_rate_hz,
        start_t_ms=start_t_ms,
        samples=samples,
    )
    return record, truth
