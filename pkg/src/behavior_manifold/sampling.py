"""Training-tuple construction under the behavioral-stationarity assumption.

Frames closer than ``k`` seconds are taken to share behavior, so each anchor
is paired with context frames drawn from its ``+-k`` neighborhood. Negatives
are a neighboring pair from a different source file.

Randomness comes from per-file substreams (``file_seed = hash(seed, source_id)``),
so the output never depends on processing order.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

log = logging.getLogger(__name__)


class ContextPair(NamedTuple):
    source_id: str
    i: int
    j: int


class TripletTuple(NamedTuple):
    a_id: str
    a: int
    p: int
    b_id: str
    n: int
    n_p: int


@dataclass(frozen=True)
class SamplerConfig:
    k_seconds: float = 6.0
    n_context: int = 4
    seed: int = 0
    shift_s: float = 1.0

    def __post_init__(self):
        if self.k_seconds <= 0:
            raise ValueError("k_seconds must be positive")
        if self.n_context < 1:
            raise ValueError("n_context must be >= 1")

    @property
    def k_frames(self) -> int:
        return int(round(self.k_seconds / self.shift_s))


@dataclass
class SkippedSource:
    source_id: str
    n_frames: int
    reason: str


def file_seed(seed: int, source_id: str, stream: str = "context") -> int:
    digest = hashlib.blake2b(f"{seed}\x00{source_id}\x00{stream}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _neighbors(index: int, n: int, k: int) -> np.ndarray:
    lo, hi = max(0, index - k), min(n - 1, index + k)
    cand = np.arange(lo, hi + 1)
    return cand[cand != index]


def _usable(seq, k: int, skipped: list | None) -> bool:
    if len(seq) > k + 1:
        return True
    log.warning("skipping %s: %d frames, need more than %d", seq.source_id, len(seq), k + 1)
    if skipped is not None:
        skipped.append(SkippedSource(seq.source_id, len(seq), f"needs > {k + 1} frames"))
    return False


def sample_context_pairs(seq, cfg: SamplerConfig, skipped: list | None = None) -> list[ContextPair]:
    """Dense anchoring: every frame gets ``n_context`` distinct neighbors."""
    k = cfg.k_frames
    if not _usable(seq, k, skipped):
        return []
    rng = np.random.default_rng(file_seed(cfg.seed, seq.source_id))
    n = len(seq)
    pairs = []
    for a in range(n):
        cand = _neighbors(a, n, k)
        take = min(cfg.n_context, cand.size)
        for j in rng.choice(cand, size=take, replace=False):
            pairs.append(ContextPair(seq.source_id, a, int(j)))
    return pairs


def sample_triplet_tuples(corpus, cfg: SamplerConfig,
                          skipped: list | None = None) -> list[TripletTuple]:
    """One tuple per context pair; the negative pair comes from another file."""
    k = cfg.k_frames
    usable = [seq for seq in corpus if _usable(seq, k, skipped)]
    if len(usable) < 2:
        raise ValueError("triplet sampling requires >=2 sources")
    ids = [seq.source_id for seq in usable]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate source ids in corpus")
    by_id = sorted(usable, key=lambda s: s.source_id)
    tuples = []
    for seq in usable:
        others = [o for o in by_id if o.source_id != seq.source_id]
        rng = np.random.default_rng(file_seed(cfg.seed, seq.source_id, "negative"))
        for pair in sample_context_pairs(seq, cfg):
            other = others[rng.integers(len(others))]
            n = int(rng.integers(len(other)))
            cand = _neighbors(n, len(other), k)
            n_p = int(cand[rng.integers(cand.size)])
            tuples.append(TripletTuple(seq.source_id, pair.i, pair.j, other.source_id, n, n_p))
    return tuples


def sample_split_tuples(corpus, cfg: SamplerConfig, val_ids) -> list[TripletTuple]:
    """Sample train and validation files separately so no tuple crosses the split."""
    val_ids = set(val_ids)
    train = [s for s in corpus if s.source_id not in val_ids]
    val = [s for s in corpus if s.source_id in val_ids]
    out = sample_triplet_tuples(train, cfg)
    if val:
        out += sample_triplet_tuples(val, cfg)
    return out


def format_manifest(tuples) -> str:
    return "".join(f"{t.a_id} {t.a} {t.p} {t.b_id} {t.n} {t.n_p}\n" for t in tuples)


def parse_manifest(text: str) -> list[TripletTuple]:
    tuples = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 6:
            raise ValueError(f"tuple manifest line {lineno}: expected 6 fields, got {len(parts)}")
        a_id, a, p, b_id, n, n_p = parts
        tuples.append(TripletTuple(a_id, int(a), int(p), b_id, int(n), int(n_p)))
    return tuples
