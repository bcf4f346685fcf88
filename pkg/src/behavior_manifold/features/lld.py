"""Frame-level low-level descriptors (LLDs).

Every 25 ms Hamming frame (10 ms hop) yields 35 base descriptors, followed by
their regression deltas, for 70 columns in total::

    pitch, intensity, mfcc_0..mfcc_14, mfb_0..mfb_7, lpc_1..lpc_8, jitter, shimmer,
    d_pitch, d_intensity, ...

Unvoiced frames carry pitch 0, jitter 0 and shimmer 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.fft import dct
from scipy.linalg import solve_toeplitz
from scipy.signal import resample_poly

TARGET_SAMPLE_RATE = 16000
INTENSITY_FLOOR_DB = -100.0
LOG_ENERGY_FLOOR = 1e-10
VOICING_THRESHOLD = 0.45
PEAK_RELATIVE_THRESHOLD = 0.9
N_MFCC_BANDS = 26


class InsufficientAudioError(ValueError):
    """The audio is shorter than one LLD frame or one analysis window."""


@dataclass(frozen=True)
class AudioBuffer:
    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("audio must be mono (1-D samples)")
        if samples.size == 0:
            raise InsufficientAudioError("insufficient audio: no samples")
        if not np.all(np.isfinite(samples)):
            raise ValueError("audio contains non-finite samples")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        object.__setattr__(self, "samples", samples)

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


@dataclass(frozen=True)
class LldConfig:
    frame_len_ms: float = 25.0
    hop_ms: float = 10.0
    n_mfcc: int = 15
    n_mfb: int = 8
    n_lpc: int = 8
    f0_min_hz: float = 60.0
    f0_max_hz: float = 500.0

    def __post_init__(self):
        if not self.frame_len_ms > self.hop_ms > 0:
            raise ValueError("need frame_len_ms > hop_ms > 0")
        if min(self.n_mfcc, self.n_mfb, self.n_lpc) < 1:
            raise ValueError("descriptor counts must be positive")
        if not 0 < self.f0_min_hz < self.f0_max_hz:
            raise ValueError("need 0 < f0_min_hz < f0_max_hz")

    @property
    def n_base(self) -> int:
        return 2 + self.n_mfcc + self.n_mfb + self.n_lpc + 2

    @property
    def n_lld(self) -> int:
        return 2 * self.n_base

    def base_names(self) -> list[str]:
        return (
            ["pitch", "intensity"]
            + [f"mfcc_{i}" for i in range(self.n_mfcc)]
            + [f"mfb_{i}" for i in range(self.n_mfb)]
            + [f"lpc_{i + 1}" for i in range(self.n_lpc)]
            + ["jitter", "shimmer"]
        )

    def lld_names(self) -> list[str]:
        base = self.base_names()
        return base + [f"d_{name}" for name in base]


@dataclass(frozen=True)
class LldSequence:
    frames: np.ndarray  # (T, n_lld)
    hop_ms: float
    frame_len_ms: float
    duration_s: float
    names: tuple[str, ...]


def _hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz) / 700.0)


def _mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel) / 2595.0) - 1.0)


def mel_filterbank(n_bands: int, n_fft: int, sample_rate: int,
                   f_min: float = 0.0, f_max: float | None = None) -> np.ndarray:
    """Triangular HTK-style mel filters, shape (n_bands, n_fft // 2 + 1)."""
    f_max = sample_rate / 2 if f_max is None else f_max
    edges_hz = _mel_to_hz(np.linspace(_hz_to_mel(f_min), _hz_to_mel(f_max), n_bands + 2))
    bins_hz = np.linspace(0.0, sample_rate / 2, n_fft // 2 + 1)
    lower, center, upper = edges_hz[:-2, None], edges_hz[1:-1, None], edges_hz[2:, None]
    rising = (bins_hz - lower) / (center - lower)
    falling = (upper - bins_hz) / (upper - center)
    return np.maximum(0.0, np.minimum(rising, falling))


def _resample(audio: AudioBuffer) -> np.ndarray:
    if audio.sample_rate_hz == TARGET_SAMPLE_RATE:
        return audio.samples
    g = np.gcd(audio.sample_rate_hz, TARGET_SAMPLE_RATE)
    return resample_poly(audio.samples, TARGET_SAMPLE_RATE // g, audio.sample_rate_hz // g)


def frame_signal(x: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    if x.size < frame_len:
        raise InsufficientAudioError(
            f"insufficient audio: {x.size} samples < one frame of {frame_len}")
    return sliding_window_view(x, frame_len)[::hop]


def autocorrelation_pitch(frames: np.ndarray, sample_rate: int,
                          f0_min: float, f0_max: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame F0 via window-normalized autocorrelation.

    Returns (f0_hz, voiced). Unvoiced frames get f0 = 0. The first lag peak
    within ``PEAK_RELATIVE_THRESHOLD`` of the best peak wins, which avoids
    picking period multiples on strongly periodic input.
    """
    n = frames.shape[1]
    window = np.hamming(n)
    centered = frames - frames.mean(axis=1, keepdims=True)
    xw = centered * window
    n_fft = 1 << int(np.ceil(np.log2(2 * n)))
    spec = np.fft.rfft(xw, n_fft, axis=1)
    acf = np.fft.irfft(np.abs(spec) ** 2, n_fft, axis=1)[:, :n]
    w_spec = np.fft.rfft(window, n_fft)
    w_acf = np.fft.irfft(np.abs(w_spec) ** 2, n_fft)[:n]

    energy = acf[:, 0]
    lag_min = max(2, int(np.floor(sample_rate / f0_max)))
    lag_max = min(n - 2, int(np.ceil(sample_rate / f0_min)))
    safe_energy = np.where(energy > 0, energy, 1.0)
    r = acf / safe_energy[:, None] / (w_acf / w_acf[0])[None, :]
    r[energy <= 0] = 0.0

    seg = r[:, lag_min - 1:lag_max + 2]
    mid = seg[:, 1:-1]
    is_peak = (mid > seg[:, :-2]) & (mid >= seg[:, 2:])
    peak_vals = np.where(is_peak, mid, -np.inf)
    best = peak_vals.max(axis=1)
    has_peak = np.isfinite(best)
    accept = is_peak & (peak_vals >= PEAK_RELATIVE_THRESHOLD * best[:, None])
    first = np.argmax(accept, axis=1)
    rows = np.arange(r.shape[0])
    lag = first + lag_min
    # parabolic refinement around the chosen lag
    y0, y1, y2 = r[rows, lag - 1], r[rows, lag], r[rows, lag + 1]
    denom = y0 - 2.0 * y1 + y2
    with np.errstate(divide="ignore", invalid="ignore"):
        offset = np.where(np.abs(denom) > 1e-12, 0.5 * (y0 - y2) / denom, 0.0)
    offset = np.clip(offset, -0.5, 0.5)
    peak_height = y1
    voiced = has_peak & (peak_height >= VOICING_THRESHOLD) & (energy > LOG_ENERGY_FLOOR * n)
    f0 = np.where(voiced, sample_rate / (lag + offset), 0.0)
    return f0, voiced


def _perturbation(values: np.ndarray, voiced: np.ndarray) -> np.ndarray:
    """|v_t - v_{t-1}| / mean(v_t, v_{t-1}) where both frames are voiced, else 0."""
    out = np.zeros_like(values)
    both = voiced[1:] & voiced[:-1]
    prev, cur = values[:-1], values[1:]
    mean = 0.5 * (prev + cur)
    ok = both & (mean > 0)
    out[1:][ok] = np.abs(cur[ok] - prev[ok]) / mean[ok]
    return out


def lpc_coefficients(frames_w: np.ndarray, order: int) -> np.ndarray:
    """Predictor coefficients a_1..a_p with x[n] ~ sum_k a_k x[n-k]."""
    n_frames, n = frames_w.shape
    out = np.zeros((n_frames, order))
    n_fft = 1 << int(np.ceil(np.log2(2 * n)))
    acf = np.fft.irfft(np.abs(np.fft.rfft(frames_w, n_fft, axis=1)) ** 2, n_fft, axis=1)
    acf = acf[:, :order + 1]
    for i in range(n_frames):
        r = acf[i]
        if r[0] <= LOG_ENERGY_FLOOR * n:
            continue
        col = r[:order].copy()
        col[0] *= 1.0 + 1e-9  # white-noise correction keeps the system well posed
        out[i] = solve_toeplitz(col, r[1:order + 1])
    return out


def regression_deltas(base: np.ndarray, width: int = 2) -> np.ndarray:
    """d_t = sum_n n (c_{t+n} - c_{t-n}) / (2 sum_n n^2), edges replicated."""
    padded = np.pad(base, ((width, width), (0, 0)), mode="edge")
    t = base.shape[0]
    num = np.zeros_like(base)
    for k in range(1, width + 1):
        num += k * (padded[width + k:width + k + t] - padded[width - k:width - k + t])
    return num / (2.0 * sum(k * k for k in range(1, width + 1)))


def compute_lld_sequence(audio: AudioBuffer, cfg: LldConfig = LldConfig()) -> LldSequence:
    if audio.sample_rate_hz < 8000:
        raise ValueError("sample_rate_hz must be >= 8000")
    x = _resample(audio)
    sr = TARGET_SAMPLE_RATE
    frame_len = int(round(cfg.frame_len_ms * sr / 1000))
    hop = int(round(cfg.hop_ms * sr / 1000))
    frames = frame_signal(x, frame_len, hop)

    window = np.hamming(frame_len)
    xw = frames * window
    power = np.mean(xw ** 2, axis=1)
    intensity = 10.0 * np.log10(np.maximum(power, LOG_ENERGY_FLOOR))

    f0, voiced = autocorrelation_pitch(frames, sr, cfg.f0_min_hz, cfg.f0_max_hz)
    period = np.where(voiced, 1.0 / np.where(voiced, f0, 1.0), 0.0)
    amplitude = np.sqrt(power)
    jitter = _perturbation(period, voiced)
    shimmer = _perturbation(amplitude, voiced)

    n_fft = 1 << int(np.ceil(np.log2(frame_len)))
    spectrum = np.abs(np.fft.rfft(xw, n_fft, axis=1)) ** 2 / n_fft
    mel_cep = np.log(np.maximum(spectrum @ mel_filterbank(N_MFCC_BANDS, n_fft, sr).T, LOG_ENERGY_FLOOR))
    mfcc = dct(mel_cep, type=2, norm="ortho", axis=1)[:, :cfg.n_mfcc]
    mfb = np.log(np.maximum(spectrum @ mel_filterbank(cfg.n_mfb, n_fft, sr).T, LOG_ENERGY_FLOOR))
    lpc = lpc_coefficients(xw, cfg.n_lpc)

    base = np.column_stack([f0, intensity, mfcc, mfb, lpc, jitter, shimmer])
    llds = np.hstack([base, regression_deltas(base)])
    return LldSequence(
        frames=llds,
        hop_ms=cfg.hop_ms,
        frame_len_ms=cfg.frame_len_ms,
        duration_s=x.size / sr,
        names=tuple(cfg.lld_names()),
    )
