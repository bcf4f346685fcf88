"""Windowed statistical functionals over LLD columns and analysis framing."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lld import InsufficientAudioError, LldSequence

FUNCTIONALS = ("p1", "p99", "range", "mean", "median", "std")
N_FUNCTIONALS = len(FUNCTIONALS)


def compute_functionals(window: np.ndarray) -> np.ndarray:
    """Six functionals per column, functional-major.

    Output index ``f * n_cols + c`` holds functional ``FUNCTIONALS[f]`` of
    column ``c``. Percentiles interpolate linearly between order statistics;
    std is the population standard deviation.
    """
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 2 or window.shape[0] == 0:
        raise ValueError("empty functional window")
    if window.shape[0] < 2:
        raise ValueError("functional window needs at least 2 rows")
    if np.isnan(window).any():
        raise ValueError("NaN in functional window")
    p1, median, p99 = np.percentile(window, [1.0, 50.0, 99.0], axis=0)
    return np.concatenate([
        p1,
        p99,
        p99 - p1,
        window.mean(axis=0),
        median,
        window.std(axis=0),
    ])


def functional_names(lld_names) -> list[str]:
    return [f"{func}__{name}" for func in FUNCTIONALS for name in lld_names]


@dataclass
class FrameSequence:
    """Analysis frames of one source; row i starts at ``i * shift_s`` seconds."""

    frames: np.ndarray  # (n_frames, dim)
    source_id: str
    window_s: float = 20.0
    shift_s: float = 1.0
    names: tuple[str, ...] | None = field(default=None, repr=False)

    def __post_init__(self):
        self.frames = np.asarray(self.frames)
        if self.frames.ndim != 2:
            raise ValueError("frames must be a 2-D array")

    def __len__(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]

    @property
    def t_start_s(self) -> np.ndarray:
        return np.arange(len(self)) * self.shift_s


def n_analysis_frames(duration_s: float, window_s: float, shift_s: float) -> int:
    # tolerance absorbs float noise in durations such as 600.0000001
    return int(np.floor((duration_s - window_s) / shift_s + 1e-9)) + 1


def extract_analysis_frames(llds: LldSequence, source_id: str = "",
                            window_s: float = 20.0, shift_s: float = 1.0) -> FrameSequence:
    if window_s <= 0 or shift_s <= 0:
        raise ValueError("window_s and shift_s must be positive")
    if llds.duration_s + 1e-9 < window_s:
        raise InsufficientAudioError(
            f"session too short: {llds.duration_s:.3f} s < analysis window {window_s} s")
    count = n_analysis_frames(llds.duration_s, window_s, shift_s)
    rows_per_window = int(np.floor((window_s * 1000 - llds.frame_len_ms) / llds.hop_ms + 1e-9)) + 1
    rows_per_shift = shift_s * 1000 / llds.hop_ms
    out = np.empty((count, llds.frames.shape[1] * 6))
    for i in range(count):
        start = int(round(i * rows_per_shift))
        out[i] = compute_functionals(llds.frames[start:start + rows_per_window])
    return FrameSequence(out, source_id, window_s, shift_s, tuple(functional_names(llds.names)))
