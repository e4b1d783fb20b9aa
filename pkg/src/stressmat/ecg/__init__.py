"""ECG processing: records, filtering, R-peak detection, heart rate."""

from .detect import RPeakSeries, detect_r_peaks, match_peaks
from .filters import ANALYSIS_BAND_HZ, bandpass_filter, design_bandpass
from .rate import (
    RR_BOUNDS_MS,
    HrSeries,
    PhaseHrStats,
    RrIntervals,
    hr_from_rr,
    hr_series,
    rr_intervals,
    segment_and_aggregate,
)
from .record import ECG_HEADER, EcgRecord, read_ecg_csv, write_ecg_csv
from .synth import synth_ecg

__all__ = [
    "ANALYSIS_BAND_HZ",
    "ECG_HEADER",
    "EcgRecord",
    "HrSeries",
    "PhaseHrStats",
    "RPeakSeries",
    "RR_BOUNDS_MS",
    "RrIntervals",
    "bandpass_filter",
    "design_bandpass",
    "detect_r_peaks",
    "hr_from_rr",
    "hr_series",
    "match_peaks",
    "read_ecg_csv",
    "rr_intervals",
    "segment_and_aggregate",
    "synth_ecg",
    "write_ecg_csv",
]
