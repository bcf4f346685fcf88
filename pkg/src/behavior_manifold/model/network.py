"""Dense encoder-decoder with PReLU activations and layer-local backward rules.

Layers map ``dims[l] -> dims[l + 1]``. Every layer except the last applies a
PReLU with one learnable slope; the output layer is linear. The bottleneck is
``dims[len(dims) // 2]``: layers before it form the encoder, the rest the
decoder. Weights are stored ``(fan_in, fan_out)`` so a batch maps as ``X @ W + b``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

DEFAULT_DIMS = (420, 300, 200, 64, 200, 300, 420)
PRELU_INIT = 0.25


class Variant(enum.Enum):
    DCN = "dcn"
    TRIPLET_ONLY = "triplet"
    TE_AUTOENCODER = "te-autoencoder"
    TE_DCN = "te-dcn"

    @classmethod
    def parse(cls, value) -> "Variant":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {"triplet-only": "triplet", "te-ae": "te-autoencoder", "tedcn": "te-dcn"}
        key = aliases.get(key, key)
        for v in cls:
            if v.value == key:
                return v
        raise ValueError(f"unknown variant {value!r}; choose from {[v.value for v in cls]}")


@dataclass
class NetworkParams:
    dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    slopes: np.ndarray  # one PReLU slope per activated layer
    variant: Variant = Variant.TE_DCN

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        if len(self.dims) < 3 or len(self.dims) % 2 == 0:
            raise ValueError("dims must have odd length >= 3 (symmetric encoder-decoder)")
        n_layers = len(self.dims) - 1
        if len(self.weights) != n_layers or len(self.biases) != n_layers:
            raise ValueError("one weight matrix and bias per layer required")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.dims[l], self.dims[l + 1]) or b.shape != (self.dims[l + 1],):
                raise ValueError(f"layer {l} has shape {w.shape}/{b.shape}, dims say "
                                 f"{(self.dims[l], self.dims[l + 1])}")
        self.slopes = np.asarray(self.slopes, dtype=np.float64)
        if self.slopes.shape != (n_layers - 1,):
            raise ValueError(f"expected {n_layers - 1} PReLU slopes")

    @property
    def n_layers(self) -> int:
        return len(self.dims) - 1

    @property
    def bottleneck(self) -> int:
        """Number of encoder layers (index of the embedding in ``dims``)."""
        return len(self.dims) // 2

    @property
    def embedding_dim(self) -> int:
        return self.dims[self.bottleneck]

    def arrays(self) -> list[np.ndarray]:
        """Fixed-order flat view; the Adam state and checkpoints follow this order."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        out.append(self.slopes)
        return out

    def copy(self) -> "NetworkParams":
        return NetworkParams(self.dims, [w.copy() for w in self.weights],
                             [b.copy() for b in self.biases], self.slopes.copy(), self.variant)

    def zeros_like(self) -> "NetworkParams":
        return NetworkParams(self.dims, [np.zeros_like(w) for w in self.weights],
                             [np.zeros_like(b) for b in self.biases],
                             np.zeros_like(self.slopes), self.variant)

    def regularized_layers(self) -> range:
        """Layers whose weights enter the L2 term; the triplet-only net has no decoder."""
        if self.variant is Variant.TRIPLET_ONLY:
            return range(self.bottleneck)
        return range(self.n_layers)

    def weight_sq_norm(self) -> float:
        return float(sum(np.sum(self.weights[l] ** 2) for l in self.regularized_layers()))


def init_params(dims=DEFAULT_DIMS, variant=Variant.TE_DCN, seed: int = 0) -> NetworkParams:
    """He-uniform (fan-in) weights, zero biases, PReLU slopes at 0.25."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return NetworkParams(tuple(dims), weights, biases,
                         np.full(len(dims) - 2, PRELU_INIT), Variant.parse(variant))


def prelu(z, slope):
    return np.where(z > 0, z, slope * z)


@dataclass
class LayerCache:
    inputs: np.ndarray
    pre: np.ndarray


def forward_layers(params: NetworkParams, h: np.ndarray, start: int, stop: int):
    """Run layers ``start..stop-1``; returns the output and per-layer caches."""
    caches = []
    for l in range(start, stop):
        z = h @ params.weights[l] + params.biases[l]
        caches.append(LayerCache(h, z))
        h = prelu(z, params.slopes[l]) if l < params.n_layers - 1 else z
    return h, caches


def backward_layers(params: NetworkParams, grads: NetworkParams, caches, start: int,
                    d_out: np.ndarray) -> np.ndarray:
    """Accumulate gradients of layers ``start..start+len(caches)-1`` into ``grads``."""
    d_h = d_out
    for offset in range(len(caches) - 1, -1, -1):
        l = start + offset
        cache = caches[offset]
        if l < params.n_layers - 1:
            positive = cache.pre > 0
            grads.slopes[l] += np.sum(np.where(positive, 0.0, d_h * cache.pre))
            d_z = np.where(positive, d_h, params.slopes[l] * d_h)
        else:
            d_z = d_h
        grads.weights[l] += cache.inputs.T @ d_z
        grads.biases[l] += d_z.sum(axis=0)
        d_h = d_z @ params.weights[l].T
    return d_h


def _as_batch(x, width: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x2 = x[None, :] if single else x
    if x2.ndim != 2 or x2.shape[1] != width:
        raise ValueError(f"dimension mismatch: expected width {width}, got shape {x.shape}")
    return x2, single


def encode(params: NetworkParams, x) -> np.ndarray:
    """Bottleneck embedding for one vector or a batch of (normalized) frames."""
    x2, single = _as_batch(x, params.dims[0])
    e, _ = forward_layers(params, x2, 0, params.bottleneck)
    return e[0] if single else e


def decode(params: NetworkParams, e) -> np.ndarray:
    e2, single = _as_batch(e, params.embedding_dim)
    x_hat, _ = forward_layers(params, e2, params.bottleneck, params.n_layers)
    return x_hat[0] if single else x_hat
