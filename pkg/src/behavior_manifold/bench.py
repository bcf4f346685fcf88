"""End-to-end synthetic comparison of raw features against learned manifolds.

Trains each requested variant on the unlabeled training domain of a
:func:`~behavior_manifold.synth.generate_benchmark` draw, then runs
leave-one-group-out session classification on the labeled evaluation corpus.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .evaluation import ClassificationResult, SessionRecord, classify_sessions
from .model import TrainConfig, Variant, train
from .sampling import SamplerConfig, sample_triplet_tuples
from .synth import Benchmark, SynthConfig, SynthCorpus, generate_benchmark

log = logging.getLogger(__name__)

RAW = "raw"


@dataclass
class BenchmarkResult:
    seed: int
    results: dict[str, list[ClassificationResult]] = field(default_factory=dict)
    seconds: dict[str, float] = field(default_factory=dict)

    def accuracy(self, system: str) -> float:
        """Accuracy averaged over behavior codes."""
        return float(np.mean([r.accuracy for r in self.results[system]]))

    def summary(self) -> dict[str, float]:
        return {name: self.accuracy(name) for name in self.results}


def session_records(corpus: SynthCorpus) -> list[SessionRecord]:
    return [SessionRecord(seq.source_id, group, seq.frames, corpus.labels[seq.source_id])
            for seq, group in zip(corpus.sequences, corpus.groups)]


def evaluate_all_codes(corpus: SynthCorpus, embedder=None) -> list[ClassificationResult]:
    sessions = session_records(corpus)
    return [classify_sessions(sessions, code, embedder) for code in corpus.config.code_names]


def train_variant(bench: Benchmark, variant, train_cfg: TrainConfig,
                  sampler_cfg: SamplerConfig = SamplerConfig()):
    frames = {s.source_id: s.frames for s in bench.train.sequences + bench.val.sequences}
    train_tuples = sample_triplet_tuples(bench.train.sequences, sampler_cfg)
    val_tuples = sample_triplet_tuples(bench.val.sequences, sampler_cfg)
    return train(train_tuples, val_tuples, frames, train_cfg, variant)


def run_benchmark(cfg: SynthConfig, train_cfg: TrainConfig,
                  variants=(Variant.DCN, Variant.TE_DCN), n_train_files: int = 12,
                  n_val_files: int = 2, sampler_cfg: SamplerConfig | None = None) -> BenchmarkResult:
    bench = generate_benchmark(cfg, n_train_files, n_val_files)
    sampler_cfg = sampler_cfg or SamplerConfig(seed=cfg.seed)
    out = BenchmarkResult(cfg.seed)
    t0 = time.perf_counter()
    out.results[RAW] = evaluate_all_codes(bench.eval)
    out.seconds[RAW] = time.perf_counter() - t0
    for variant in variants:
        variant = Variant.parse(variant)
        t0 = time.perf_counter()
        ckpt = train_variant(bench, variant, train_cfg, sampler_cfg)
        out.results[variant.value] = evaluate_all_codes(bench.eval, ckpt.embed)
        out.seconds[variant.value] = time.perf_counter() - t0
        log.info("seed %d %s: accuracy %.3f after %d epochs (%.0f s)", cfg.seed, variant.value,
                 out.accuracy(variant.value), ckpt.epoch, out.seconds[variant.value])
    return out
