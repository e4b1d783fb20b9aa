"""Uniformly sampled ECG records and their on-disk text format.

Files are plain delimited text: a ``t_ms,ecg_mv`` header then one sample per
line. Timestamps must sit on a uniform grid; a file whose step jitter
exceeds 1% of the nominal step is rejected rather than resampled.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import SignalFormatError

ECG_HEADER = "t_ms,ecg_mv"
MAX_STEP_JITTER = 0.01


@dataclass
class EcgRecord:
    sampling_rate_hz: float
    start_t_ms: int
    samples: np.ndarray  # millivolts, float64

    def __post_init__(self):
        if self.sampling_rate_hz <= 0:
            raise ValueError(f"sampling_rate_hz must be positive, got {self.sampling_rate_hz}")
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if self.samples.size and not np.all(np.isfinite(self.samples)):
            raise ValueError("samples contain non-finite values")

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sampling_rate_hz

    @property
    def step_ms(self) -> float:
        return 1000.0 / self.sampling_rate_hz

    def t_ms(self, indices=None) -> np.ndarray:
        """Timestamps (ms, session epoch) of all samples or the given indices."""
        if indices is None:
            indices = np.arange(self.samples.size)
        return self.start_t_ms + np.asarray(indices) * self.step_ms


def write_ecg_csv(path, record: EcgRecord) -> None:
    t = record.t_ms()
    with open(path, "w") as fh:
        fh.write(ECG_HEADER + "\n")
        fh.writelines(
            f"{ti!r},{vi!r}\n" for ti, vi in zip(t.tolist(), record.samples.tolist())
        )


def read_ecg_csv(path) -> EcgRecord:
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().strip()
        if header != ECG_HEADER:
            raise SignalFormatError(f"{path}: expected header {ECG_HEADER!r}, got {header!r}")
        try:
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise SignalFormatError(f"{path}: unparseable sample line ({exc})") from exc
    if data.size == 0:
        raise SignalFormatError(f"{path}: no samples")
    if data.shape[1] != 2:
        raise SignalFormatError(f"{path}: expected two columns, got {data.shape[1]}")
    t, values = data[:, 0], data[:, 1]
    if len(t) < 2:
        raise SignalFormatError(f"{path}: need at least two samples to infer the rate")
    steps = np.diff(t)
    step = float(np.median(steps))
    if step <= 0:
        raise SignalFormatError(f"{path}: timestamps are not increasing")
    if np.max(np.abs(steps - step)) > MAX_STEP_JITTER * step:
        raise SignalFormatError(
            f"{path}: sample grid is not uniform within {MAX_STEP_JITTER:.0%} "
            f"of the {step:g} ms step; refusing to resample"
        )
    return EcgRecord(
        sampling_rate_hz=1000.0 / step,
        start_t_ms=int(round(t[0])),
        samples=values,
    )
