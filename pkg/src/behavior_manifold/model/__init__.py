"""Encoder-decoder network, losses, gradients, Adam and training loops."""

from .checkpoint import (
    InvalidCheckpoint,
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from .losses import euclidean, reconstruction_loss, triplet_loss
from .network import (
    DEFAULT_DIMS,
    NetworkParams,
    Variant,
    decode,
    encode,
    init_params,
)
from .objective import Batch, LossParts, TrainConfig, compute_gradients, loss_and_grads, total_loss
from .optim import AdamState, adam_step, step_decay_lr
from .training import Checkpoint, Normalizer, TupleData, evaluate_loss, train

__all__ = [
    "AdamState",
    "Batch",
    "Checkpoint",
    "DEFAULT_DIMS",
    "InvalidCheckpoint",
    "LossParts",
    "NetworkParams",
    "Normalizer",
    "TrainConfig",
    "TupleData",
    "Variant",
    "adam_step",
    "compute_gradients",
    "decode",
    "decode_checkpoint",
    "encode",
    "encode_checkpoint",
    "euclidean",
    "evaluate_loss",
    "init_params",
    "load_checkpoint",
    "loss_and_grads",
    "reconstruction_loss",
    "save_checkpoint",
    "step_decay_lr",
    "total_loss",
    "train",
    "triplet_loss",
]
