"""Reconstruction and triplet losses with their gradients.

Both losses are summed over the batch. The triplet distance is the unsquared
Euclidean norm; at coincident points its gradient is taken as 0, and the hinge
at exactly 0 contributes no gradient.
"""

from __future__ import annotations

import numpy as np


def _check_same(a, b):
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")


def reconstruction_loss(x_hat, x_target) -> float:
    x_hat, x_target = np.asarray(x_hat, float), np.asarray(x_target, float)
    _check_same(x_hat, x_target)
    return float(np.sum((x_hat - x_target) ** 2))


def reconstruction_grad(x_hat, x_target) -> np.ndarray:
    return 2.0 * (x_hat - x_target)


def euclidean(u, v) -> np.ndarray:
    """Row-wise distance, guarded as sqrt(max(0, |u - v|^2))."""
    diff = np.atleast_2d(u) - np.atleast_2d(v)
    return np.sqrt(np.maximum(0.0, np.sum(diff * diff, axis=-1)))


def triplet_terms(e_a, e_p, e_n, margin: float) -> np.ndarray:
    e_a, e_p, e_n = (np.atleast_2d(np.asarray(e, float)) for e in (e_a, e_p, e_n))
    _check_same(e_a, e_p)
    _check_same(e_a, e_n)
    if margin < 0:
        raise ValueError("margin must be non-negative")
    return np.maximum(0.0, margin + euclidean(e_a, e_p) - euclidean(e_a, e_n))


def triplet_loss(e_a, e_p, e_n, margin: float = 2.0) -> float:
    return float(np.sum(triplet_terms(e_a, e_p, e_n, margin)))


def triplet_grad(e_a, e_p, e_n, margin: float):
    """Gradients of the summed hinge w.r.t. (e_a, e_p, e_n)."""
    d_ap_vec, d_an_vec = e_a - e_p, e_a - e_n
    d_ap, d_an = euclidean(e_a, e_p), euclidean(e_a, e_n)
    active = (margin + d_ap - d_an) > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        u_ap = np.where((d_ap > 0)[:, None], d_ap_vec / d_ap[:, None], 0.0)
        u_an = np.where((d_an > 0)[:, None], d_an_vec / d_an[:, None], 0.0)
    mask = active[:, None].astype(float)
    g_p = -u_ap * mask
    g_n = u_an * mask
    g_a = -(g_p + g_n)
    return g_a, g_p, g_n
