"""WAV input and the ``BMF1`` binary feature container.

Layout (little-endian)::

    b"BMF1" | version u32 | n_frames u32 | dim u32 | window_s f32 | shift_s f32
    | n_frames * dim float32, row-major
"""

from __future__ import annotations

import csv
import io
import os
import struct
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from ..atomic import atomic_write_bytes
from .functionals import FrameSequence
from .lld import AudioBuffer

MAGIC = b"BMF1"
VERSION = 1
_HEADER = struct.Struct("<4sIIIff")
FEATURE_SUFFIX = ".bmf"


class InvalidFeatureFile(ValueError):
    pass


def read_wav(path) -> AudioBuffer:
    """Read 16-bit PCM WAV; stereo is averaged down to mono."""
    sample_rate, data = wavfile.read(path)
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif np.issubdtype(data.dtype, np.floating):
        samples = data.astype(np.float64)
    else:
        raise ValueError(f"unsupported WAV sample type {data.dtype}; expected 16-bit PCM")
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    return AudioBuffer(samples, int(sample_rate))


def write_wav(path, audio: AudioBuffer) -> None:
    pcm = np.clip(np.round(audio.samples * 32767.0), -32768, 32767).astype(np.int16)
    buf = io.BytesIO()
    wavfile.write(buf, audio.sample_rate_hz, pcm)
    atomic_write_bytes(path, buf.getvalue())


def encode_features(seq: FrameSequence) -> bytes:
    frames = np.ascontiguousarray(seq.frames, dtype="<f4")
    n_frames, dim = frames.shape
    return _HEADER.pack(MAGIC, VERSION, n_frames, dim, seq.window_s, seq.shift_s) + frames.tobytes()


def decode_features(blob: bytes, source_id: str = "") -> FrameSequence:
    if len(blob) < _HEADER.size:
        raise InvalidFeatureFile("invalid feature file: truncated header")
    magic, version, n_frames, dim, window_s, shift_s = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise InvalidFeatureFile(f"invalid feature file: bad magic {magic!r}")
    if version != VERSION:
        raise InvalidFeatureFile(f"invalid feature file: unsupported version {version}")
    expected = _HEADER.size + 4 * n_frames * dim
    if len(blob) != expected:
        raise InvalidFeatureFile(
            f"invalid feature file: expected {expected} bytes, found {len(blob)}")
    frames = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size).reshape(n_frames, dim)
    return FrameSequence(frames.astype(np.float64), source_id, float(window_s), float(shift_s))


def write_features(path, seq: FrameSequence) -> None:
    atomic_write_bytes(path, encode_features(seq))


def read_features(path) -> FrameSequence:
    path = Path(path)
    return decode_features(path.read_bytes(), source_id=path.name[: -len(FEATURE_SUFFIX)]
                           if path.name.endswith(FEATURE_SUFFIX) else path.stem)


def read_feature_dir(directory) -> list[FrameSequence]:
    """All ``*.bmf`` files in a directory, sorted by source id."""
    paths = sorted(Path(directory).glob(f"*{FEATURE_SUFFIX}"))
    return [read_features(p) for p in paths]


def features_to_csv(seq: FrameSequence, names=None) -> str:
    names = names or seq.names or [f"f{i}" for i in range(seq.dim)]
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["t_start_s", *names])
    frames32 = np.asarray(seq.frames, dtype=np.float32)
    for t, row in zip(seq.t_start_s, frames32):
        writer.writerow([f"{t:g}", *(repr(float(v)) for v in row)])
    return out.getvalue()


def feature_path(directory, source_id: str) -> str:
    return os.path.join(directory, source_id + FEATURE_SUFFIX)
