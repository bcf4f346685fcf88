"""Variant objectives and their exact reverse-mode gradients.

A batch holds four aligned frame matrices ``xa, xp, xn, xnp`` (anchor,
positive neighbor, negative, negative's neighbor). Per variant:

=================  =============================  ==================  =======
variant            encoder inputs                 reconstruction      triplet
=================  =============================  ==================  =======
DCN                xa                             xa -> xp            no
TRIPLET_ONLY       xa, xp, xn                     none                yes
TE_AUTOENCODER     xa, xp, xn                     each -> itself      yes
TE_DCN             xa, xp, xn                     xa->xp, xp->xa,     yes
                                                  xn->xnp
=================  =============================  ==================  =======

Every variant adds ``l2_weight * sum ||W||^2`` over its weight matrices.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .losses import reconstruction_grad, triplet_grad, triplet_terms
from .network import NetworkParams, Variant, backward_layers, forward_layers


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 0.001
    lr_decay: float = 0.1
    lr_decay_every: int = 10
    margin: float = 2.0
    l2_weight: float = 0.01
    batch_size: int = 256
    max_epochs: int = 100
    patience: int = 5
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.lr <= 0 or self.batch_size <= 0 or self.max_epochs <= 0:
            raise ValueError("lr, batch_size and max_epochs must be positive")
        if self.margin < 0 or self.l2_weight < 0 or self.patience < 0:
            raise ValueError("margin, l2_weight and patience must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Batch:
    xa: np.ndarray
    xp: np.ndarray
    xn: np.ndarray | None = None
    xnp: np.ndarray | None = None

    def __len__(self):
        return self.xa.shape[0]


@dataclass
class LossParts:
    reconstruction: float
    triplet: float
    l2: float

    @property
    def total(self) -> float:
        return self.reconstruction + self.triplet + self.l2


def _plan(variant: Variant, batch: Batch, negative_branch: bool):
    """Encoder inputs, reconstruction targets (None = no decoder), triplet flag."""
    if variant is Variant.DCN:
        return [batch.xa], [batch.xp], False
    if variant is Variant.TE_DCN and not negative_branch:
        return [batch.xa, batch.xp], [batch.xp, batch.xa], False
    if batch.xn is None or batch.xnp is None:
        raise ValueError(f"{variant.value} needs negative frames in the batch")
    inputs = [batch.xa, batch.xp, batch.xn]
    if variant is Variant.TRIPLET_ONLY:
        return inputs, None, True
    if variant is Variant.TE_AUTOENCODER:
        return inputs, inputs, True
    return inputs, [batch.xp, batch.xa, batch.xnp], True


def _check_finite(parts: LossParts):
    bad = {k: v for k, v in asdict(parts).items() if not np.isfinite(v)}
    if bad:
        raise FloatingPointError(f"non-finite loss terms: {bad}")


def loss_and_grads(params: NetworkParams, batch: Batch, cfg: TrainConfig,
                   triplet_weight: float = 1.0, negative_branch: bool = True,
                   need_grads: bool = True):
    """Return ``(LossParts, grads)``; grads share the NetworkParams layout."""
    inputs, targets, use_triplet = _plan(params.variant, batch, negative_branch)
    n_in = len(inputs)
    x = np.vstack(inputs)
    emb, enc_caches = forward_layers(params, x, 0, params.bottleneck)

    recon = 0.0
    d_emb = np.zeros_like(emb)
    grads = params.zeros_like() if need_grads else None
    if targets is not None:
        x_hat, dec_caches = forward_layers(params, emb, params.bottleneck, params.n_layers)
        target = np.vstack(targets)
        recon = float(np.sum((x_hat - target) ** 2))
        if need_grads:
            d_emb += backward_layers(params, grads, dec_caches, params.bottleneck,
                                     reconstruction_grad(x_hat, target))

    trip = 0.0
    if use_triplet:
        e_a, e_p, e_n = np.split(emb, n_in)
        trip = triplet_weight * float(np.sum(triplet_terms(e_a, e_p, e_n, cfg.margin)))
        if need_grads and triplet_weight != 0.0:
            g_a, g_p, g_n = triplet_grad(e_a, e_p, e_n, cfg.margin)
            d_emb += triplet_weight * np.vstack([g_a, g_p, g_n])

    l2 = cfg.l2_weight * params.weight_sq_norm()
    parts = LossParts(recon, trip, l2)
    _check_finite(parts)
    if need_grads:
        backward_layers(params, grads, enc_caches, 0, d_emb)
        for l in params.regularized_layers():
            grads.weights[l] += 2.0 * cfg.l2_weight * params.weights[l]
    return parts, grads


def total_loss(params: NetworkParams, batch: Batch, cfg: TrainConfig) -> float:
    parts, _ = loss_and_grads(params, batch, cfg, need_grads=False)
    return parts.total


def compute_gradients(params: NetworkParams, batch: Batch, cfg: TrainConfig) -> NetworkParams:
    _, grads = loss_and_grads(params, batch, cfg)
    return grads
