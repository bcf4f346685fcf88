"""Synthetic corpora with known, piecewise-constant behavior states.

Frames are generated directly in analysis-feature space::

    frame = state_map @ z[state] + nuisance_strength * file_nuisance + noise_sigma * N(0, I)

``z[state]`` are fixed latent codes and ``state_map`` a fixed random linear
map, both drawn from ``map_seed`` so that separately generated corpora (e.g.
an unlabeled training domain and a labeled evaluation domain) share the same
behavior geometry. File nuisance vectors are constant within a file and lie
in a low-rank subspace drawn from the corpus ``seed``, playing the role of
speaker and channel characteristics of one recording domain.

Sessions are grouped ``files_per_group`` at a time (a couple), and each
session leans toward one preferred state, which yields session-level binary
codes: code ``j`` is present when most frames sit in states whose bit ``j``
is set.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from .features.functionals import FrameSequence, n_analysis_frames
from .features.lld import AudioBuffer


@dataclass(frozen=True)
class SynthConfig:
    n_files: int = 20
    file_duration_s: float = 600.0
    behavior_dwell_s: float = 45.0
    n_behavior_states: int = 4
    nuisance_strength: float = 0.8
    noise_sigma: float = 1.0
    seed: int = 0
    map_seed: int | None = None
    dim: int = 420
    latent_dim: int = 8
    nuisance_scale: float = 1.0
    nuisance_rank: int = 4
    min_dwell_s: float = 25.0
    preference: float | None = 0.7
    files_per_group: int = 2
    window_s: float = 20.0
    shift_s: float = 1.0
    prefix: str = "s"

    def __post_init__(self):
        if self.n_behavior_states < 2:
            raise ValueError("need at least 2 behavior states")
        if self.behavior_dwell_s <= self.window_s:
            raise ValueError("behavior_dwell_s must exceed the analysis window")
        if not 0.0 <= self.nuisance_strength <= 1.0:
            raise ValueError("nuisance_strength must lie in [0, 1]")
        if self.n_files < 1 or self.files_per_group < 1:
            raise ValueError("n_files and files_per_group must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")

    @property
    def effective_map_seed(self) -> int:
        return self.seed if self.map_seed is None else self.map_seed

    @property
    def code_names(self) -> list[str]:
        n_bits = int(np.ceil(np.log2(self.n_behavior_states)))
        return [f"code{j}" for j in range(n_bits)]


@dataclass
class SynthCorpus:
    config: SynthConfig
    sequences: list[FrameSequence]
    states: list[np.ndarray]
    nuisance: np.ndarray  # (n_files, dim)
    groups: list[str]
    preferred: list[int | None]
    labels: dict[str, dict[str, int]] = field(default_factory=dict)

    @property
    def source_ids(self) -> list[str]:
        return [s.source_id for s in self.sequences]


def behavior_geometry(cfg: SynthConfig) -> tuple[np.ndarray, np.ndarray]:
    """(state_map (dim, latent), latent codes (n_states, latent)) from ``map_seed``."""
    rng = np.random.default_rng([cfg.effective_map_seed, 0x5EED])
    state_map = rng.normal(size=(cfg.dim, cfg.latent_dim)) / np.sqrt(cfg.latent_dim)
    codes = rng.normal(size=(cfg.n_behavior_states, cfg.latent_dim))
    return state_map, codes


def state_means(cfg: SynthConfig) -> np.ndarray:
    state_map, codes = behavior_geometry(cfg)
    return codes @ state_map.T


def _state_sequence(rng, n_frames: int, cfg: SynthConfig, preferred: int | None) -> np.ndarray:
    n_states = cfg.n_behavior_states
    if preferred is None:
        probs = np.full(n_states, 1.0 / n_states)
    else:
        probs = np.full(n_states, (1.0 - cfg.preference) / (n_states - 1))
        probs[preferred] = cfg.preference
    states = np.empty(n_frames, dtype=np.int64)
    t = 0
    while t < n_frames:
        dwell_s = max(cfg.min_dwell_s, rng.exponential(cfg.behavior_dwell_s))
        length = max(1, int(round(dwell_s / cfg.shift_s)))
        states[t:t + length] = rng.choice(n_states, p=probs)
        t += length
    return states


def session_labels(states: np.ndarray, code_names) -> dict[str, int]:
    """Code j is present when more than half the frames have bit j set."""
    return {name: int(np.mean((states >> j) & 1) > 0.5) for j, name in enumerate(code_names)}


def generate(cfg: SynthConfig) -> SynthCorpus:
    rng = np.random.default_rng([cfg.seed, 0xC0DE])
    means = state_means(cfg)
    basis = rng.normal(size=(cfg.dim, cfg.nuisance_rank)) / np.sqrt(cfg.nuisance_rank)
    nuisance = cfg.nuisance_scale * rng.normal(size=(cfg.n_files, cfg.nuisance_rank)) @ basis.T
    n_frames = n_analysis_frames(cfg.file_duration_s, cfg.window_s, cfg.shift_s)
    if n_frames < 1:
        raise ValueError("file_duration_s shorter than one analysis window")
    if cfg.preference is None:
        preferred = [None] * cfg.n_files
    else:
        preferred = list(rng.permutation(np.arange(cfg.n_files) % cfg.n_behavior_states))
    width = len(str(max(cfg.n_files - 1, 1)))
    sequences, states, groups, labels = [], [], [], {}
    for f in range(cfg.n_files):
        file_rng = np.random.default_rng([cfg.seed, 0xF11E, f])
        pref = None if preferred[f] is None else int(preferred[f])
        st = _state_sequence(file_rng, n_frames, cfg, pref)
        noise = cfg.noise_sigma * file_rng.normal(size=(n_frames, cfg.dim))
        frames = means[st] + cfg.nuisance_strength * nuisance[f] + noise
        sid = f"{cfg.prefix}{f:0{width}d}"
        sequences.append(FrameSequence(frames, sid, cfg.window_s, cfg.shift_s))
        states.append(st)
        groups.append(f"{cfg.prefix}g{f // cfg.files_per_group:0{width}d}")
        labels[sid] = session_labels(st, cfg.code_names)
    return SynthCorpus(cfg, sequences, states, nuisance, groups, preferred, labels)


@dataclass
class Benchmark:
    train: SynthCorpus
    val: SynthCorpus
    eval: SynthCorpus


def generate_benchmark(cfg: SynthConfig, n_train_files: int = 12, n_val_files: int = 2) -> Benchmark:
    """Unlabeled training and validation domains plus the labeled evaluation corpus.

    All three share the behavior geometry; each has its own nuisance subspace
    and the training domains have no per-session state preference.
    """
    map_seed = cfg.effective_map_seed
    unlabeled = replace(cfg, map_seed=map_seed, preference=None)
    train = generate(replace(unlabeled, n_files=n_train_files, seed=cfg.seed + 1_000_003, prefix="t"))
    val = generate(replace(unlabeled, n_files=n_val_files, seed=cfg.seed + 2_000_003, prefix="v"))
    evaluation = generate(replace(cfg, map_seed=map_seed))
    return Benchmark(train, val, evaluation)


def stationarity_rate(corpus: SynthCorpus, k_frames: int = 6) -> float:
    """Fraction of (i, j) pairs with 1 <= |i - j| <= k that share a state."""
    same = total = 0
    for st in corpus.states:
        for d in range(1, k_frames + 1):
            if st.size > d:
                eq = st[d:] == st[:-d]
                same += 2 * int(eq.sum())
                total += 2 * eq.size
    return same / total if total else float("nan")


def labels_csv(corpus: SynthCorpus) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["session_id", "group_id", "code", "label"])
    for seq, group in zip(corpus.sequences, corpus.groups):
        for code, label in corpus.labels[seq.source_id].items():
            w.writerow([seq.source_id, group, code, label])
    return out.getvalue()


def states_csv(corpus: SynthCorpus) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["source_id", "frame", "t_start_s", "state"])
    for seq, st in zip(corpus.sequences, corpus.states):
        for i, s in enumerate(st):
            w.writerow([seq.source_id, i, f"{i * seq.shift_s:g}", int(s)])
    return out.getvalue()


def generate_audio(cfg: SynthConfig, file_index: int = 0,
                   sample_rate: int = 16000) -> tuple[AudioBuffer, np.ndarray]:
    """Voiced tone whose pitch and level follow a piecewise-constant state track.

    Returns the audio and the per-second state sequence. Used to drive the
    feature extractor end to end; not meant to sound like speech.
    """
    rng = np.random.default_rng([cfg.seed, 0xA0D10, file_index])
    n_seconds = int(np.ceil(cfg.file_duration_s))
    states = _state_sequence(rng, n_seconds, replace(cfg, shift_s=1.0), None)
    t_sec = np.arange(int(cfg.file_duration_s * sample_rate)) / sample_rate
    st = states[np.minimum((t_sec).astype(int), n_seconds - 1)]
    f0 = 110.0 + 45.0 * st + 3.0 * np.sin(2 * np.pi * 0.5 * t_sec)
    level = 0.15 + 0.1 * st / max(cfg.n_behavior_states - 1, 1)
    phase = 2 * np.pi * np.cumsum(f0) / sample_rate
    wave = level * (np.sin(phase) + 0.3 * np.sin(2 * phase) + 0.1 * np.sin(3 * phase))
    wave += 0.005 * rng.normal(size=wave.size)
    return AudioBuffer(np.clip(wave, -1.0, 1.0), sample_rate), states
