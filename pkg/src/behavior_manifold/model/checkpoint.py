"""``BMC1`` checkpoint container.

Little-endian layout::

    b"BMC1" | version u32 | n_dims u32 | dims u32[n_dims] | variant_len u32 | variant utf-8
    | meta_len u32 | meta JSON utf-8 (config, epoch, loss histories)
    | f64 arrays: W_0, b_0, ..., W_{L-1}, b_{L-1}, slopes, norm_mean, norm_std

Floats are stored as f64, so a round trip is bit-exact.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from ..atomic import atomic_write_bytes
from .network import NetworkParams, Variant
from .objective import TrainConfig
from .training import Checkpoint, Normalizer

MAGIC = b"BMC1"
VERSION = 1


class InvalidCheckpoint(ValueError):
    pass


def _u32(x: int) -> bytes:
    return struct.pack("<I", x)


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    p = ckpt.params
    variant = p.variant.value.encode()
    meta = json.dumps({
        "config": ckpt.config.to_dict(),
        "epoch": ckpt.epoch,
        "val_history": [float(v).hex() for v in ckpt.val_history],
        "train_history": [float(v).hex() for v in ckpt.train_history],
    }, sort_keys=True).encode()
    parts = [MAGIC, _u32(VERSION), _u32(len(p.dims)), struct.pack(f"<{len(p.dims)}I", *p.dims),
             _u32(len(variant)), variant, _u32(len(meta)), meta]
    for arr in [*p.arrays(), ckpt.normalizer.mean, ckpt.normalizer.std]:
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, blob: bytes):
        self.blob, self.pos = blob, 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise InvalidCheckpoint("invalid checkpoint: truncated")
        out = self.blob[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def f64(self, shape) -> np.ndarray:
        count = int(np.prod(shape))
        return np.frombuffer(self.take(8 * count), dtype="<f8").reshape(shape).astype(np.float64)


def decode_checkpoint(blob: bytes) -> Checkpoint:
    r = _Reader(blob)
    if r.take(4) != MAGIC:
        raise InvalidCheckpoint("invalid checkpoint: bad magic")
    version = r.u32()
    if version != VERSION:
        raise InvalidCheckpoint(f"invalid checkpoint: unsupported version {version}")
    n_dims = r.u32()
    dims = struct.unpack(f"<{n_dims}I", r.take(4 * n_dims))
    variant = Variant.parse(r.take(r.u32()).decode())
    meta = json.loads(r.take(r.u32()).decode())
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(r.f64((fan_in, fan_out)))
        biases.append(r.f64((fan_out,)))
    slopes = r.f64((len(dims) - 2,))
    mean, std = r.f64((dims[0],)), r.f64((dims[0],))
    if r.pos != len(blob):
        raise InvalidCheckpoint("invalid checkpoint: trailing bytes")
    params = NetworkParams(dims, weights, biases, slopes, variant)
    return Checkpoint(
        params=params,
        normalizer=Normalizer(mean, std),
        config=TrainConfig(**meta["config"]),
        epoch=meta["epoch"],
        val_history=[float.fromhex(v) for v in meta["val_history"]],
        train_history=[float.fromhex(v) for v in meta["train_history"]],
    )


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    atomic_write_bytes(path, encode_checkpoint(ckpt))


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        return decode_checkpoint(fh.read())
