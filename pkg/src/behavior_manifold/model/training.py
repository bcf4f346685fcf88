"""Mini-batch training with Adam, step decay and validation early stopping."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .network import DEFAULT_DIMS, NetworkParams, Variant, encode, init_params
from .objective import Batch, TrainConfig, loss_and_grads
from .optim import AdamState, adam_step, step_decay_lr

log = logging.getLogger(__name__)


@dataclass
class Normalizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, frames: np.ndarray) -> "Normalizer":
        frames = np.asarray(frames, dtype=np.float64)
        std = frames.std(axis=0)
        # constant columns pass through centered
        std = np.where(std > 1e-12, std, 1.0)
        return cls(frames.mean(axis=0), std)

    @classmethod
    def identity(cls, dim: int) -> "Normalizer":
        return cls(np.zeros(dim), np.ones(dim))

    def apply(self, frames) -> np.ndarray:
        return (np.asarray(frames, dtype=np.float64) - self.mean) / self.std


@dataclass
class Checkpoint:
    params: NetworkParams
    normalizer: Normalizer
    config: TrainConfig
    epoch: int = 0
    val_history: list[float] = field(default_factory=list)
    train_history: list[float] = field(default_factory=list)

    def embed(self, frames) -> np.ndarray:
        """Normalize raw analysis frames, then encode them."""
        return encode(self.params, self.normalizer.apply(frames))


class TupleData:
    """Frames of all referenced sources stacked once; tuples become row indices."""

    def __init__(self, tuples, frames_by_source: dict[str, np.ndarray]):
        if not tuples:
            raise ValueError("empty tuple set")
        ids = sorted({t.a_id for t in tuples} | {t.b_id for t in tuples})
        missing = [s for s in ids if s not in frames_by_source]
        if missing:
            raise KeyError(f"tuples reference unknown sources: {missing[:5]}")
        offsets, blocks, start = {}, [], 0
        for sid in ids:
            block = np.asarray(frames_by_source[sid], dtype=np.float64)
            offsets[sid] = (start, block.shape[0])
            blocks.append(block)
            start += block.shape[0]
        self.frames = np.vstack(blocks)
        self.source_ids = ids

        def rows(sid, local):
            base, n = offsets[sid]
            if not 0 <= local < n:
                raise IndexError(f"frame {local} out of range for {sid} ({n} frames)")
            return base + local

        self.index = np.array(
            [(rows(t.a_id, t.a), rows(t.a_id, t.p), rows(t.b_id, t.n), rows(t.b_id, t.n_p))
             for t in tuples], dtype=np.int64)

    def __len__(self):
        return self.index.shape[0]

    def batch(self, sel) -> Batch:
        idx = self.index[sel]
        f = self.frames
        return Batch(f[idx[:, 0]], f[idx[:, 1]], f[idx[:, 2]], f[idx[:, 3]])


def fit_normalizer(tuples, frames_by_source) -> Normalizer:
    """Statistics over every frame of the sources the training tuples touch."""
    ids = sorted({t.a_id for t in tuples} | {t.b_id for t in tuples})
    return Normalizer.fit(np.vstack([frames_by_source[s] for s in ids]))


def evaluate_loss(params: NetworkParams, data: TupleData, cfg: TrainConfig) -> float:
    """Total loss over a tuple set divided by its size (L2 term counted once)."""
    data_terms = 0.0
    l2 = 0.0
    for start in range(0, len(data), cfg.batch_size):
        parts, _ = loss_and_grads(params, data.batch(slice(start, start + cfg.batch_size)), cfg,
                                  need_grads=False)
        data_terms += parts.reconstruction + parts.triplet
        l2 = parts.l2
    return (data_terms + l2) / len(data)


def train(train_tuples, val_tuples, frames_by_source: dict[str, np.ndarray],
          cfg: TrainConfig = TrainConfig(), variant=Variant.TE_DCN, dims=DEFAULT_DIMS,
          normalizer: Normalizer | None = None) -> Checkpoint:
    """Train one variant and return the checkpoint with the lowest validation loss.

    ``val_history[0]`` is the validation loss of the initial network; entry
    ``e`` is measured after epoch ``e``. Training stops after ``patience``
    consecutive epochs without a strict improvement, or at ``max_epochs``.
    """
    variant = Variant.parse(variant)
    train_ids = {t.a_id for t in train_tuples} | {t.b_id for t in train_tuples}
    val_ids = {t.a_id for t in val_tuples} | {t.b_id for t in val_tuples}
    if not val_tuples:
        raise ValueError("empty validation tuple set")
    if train_ids & val_ids:
        raise ValueError(f"train and validation share source files: {sorted(train_ids & val_ids)[:5]}")
    if normalizer is None:
        normalizer = fit_normalizer(train_tuples, frames_by_source)
    normalized = {sid: normalizer.apply(f) for sid, f in frames_by_source.items()
                  if sid in train_ids or sid in val_ids}
    train_data = TupleData(train_tuples, normalized)
    val_data = TupleData(val_tuples, normalized)
    if train_data.frames.shape[1] != dims[0]:
        raise ValueError(f"features have {train_data.frames.shape[1]} dims, network expects {dims[0]}")

    rng = np.random.default_rng(cfg.seed)
    params = init_params(dims, variant, seed=int(rng.integers(2**63)))
    state = AdamState.for_params(params)
    best = params.copy()
    best_loss = evaluate_loss(params, val_data, cfg)
    val_history, train_history = [best_loss], []
    best_epoch, stale = 0, 0
    for epoch in range(cfg.max_epochs):
        lr = step_decay_lr(cfg.lr, epoch, cfg.lr_decay, cfg.lr_decay_every)
        order = rng.permutation(len(train_data))
        epoch_loss = 0.0
        for start in range(0, len(order), cfg.batch_size):
            parts, grads = loss_and_grads(params, train_data.batch(order[start:start + cfg.batch_size]), cfg)
            epoch_loss += parts.reconstruction + parts.triplet
            adam_step(params, grads, state, lr, cfg.beta1, cfg.beta2, cfg.eps)
        train_history.append(epoch_loss / len(train_data))
        val_loss = evaluate_loss(params, val_data, cfg)
        val_history.append(val_loss)
        log.info("%s epoch %d lr %.2e train %.4f val %.4f", variant.value, epoch + 1, lr,
                 train_history[-1], val_loss)
        if val_loss < best_loss:
            best_loss, best, best_epoch, stale = val_loss, params.copy(), epoch + 1, 0
        else:
            stale += 1
        if stale >= cfg.patience:
            break
    return Checkpoint(best, normalizer, cfg, best_epoch, val_history, train_history)
