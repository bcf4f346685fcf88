"""Independent reference implementations used only by the tests.

Everything here is written with plain Python loops over floats so it shares
no code path with the vectorized library.
"""

import math

import numpy as np

from behavior_manifold.model import Batch, NetworkParams, TrainConfig, Variant, total_loss


def scalar_layers(params: NetworkParams, x, start, stop):
    h = [float(v) for v in x]
    last = len(params.dims) - 2
    for l in range(start, stop):
        w, b = params.weights[l], params.biases[l]
        out = []
        for j in range(w.shape[1]):
            z = float(b[j])
            for i in range(w.shape[0]):
                z += h[i] * float(w[i, j])
            if l < last:
                z = z if z > 0 else float(params.slopes[l]) * z
            out.append(z)
        h = out
    return h


def scalar_encode(params, x):
    return scalar_layers(params, x, 0, len(params.dims) // 2)


def scalar_decode(params, e):
    return scalar_layers(params, e, len(params.dims) // 2, len(params.dims) - 1)


def sq_dist(u, v):
    return sum((a - b) ** 2 for a, b in zip(u, v))


def scalar_total_loss(params: NetworkParams, batch: Batch, cfg: TrainConfig) -> float:
    """Per-tuple loop over the variant objectives, then the weight penalty."""
    variant = params.variant
    k = len(params.dims) // 2
    total = 0.0
    for r in range(batch.xa.shape[0]):
        xa, xp = batch.xa[r], batch.xp[r]
        ea, ep = scalar_encode(params, xa), scalar_encode(params, xp)
        if variant is Variant.DCN:
            total += sq_dist(scalar_decode(params, ea), xp)
            continue
        xn, xnp = batch.xn[r], batch.xnp[r]
        en = scalar_encode(params, xn)
        hinge = cfg.margin + math.sqrt(sq_dist(ea, ep)) - math.sqrt(sq_dist(ea, en))
        total += max(0.0, hinge)
        if variant is Variant.TE_DCN:
            total += sq_dist(scalar_decode(params, ea), xp)
            total += sq_dist(scalar_decode(params, ep), xa)
            total += sq_dist(scalar_decode(params, en), xnp)
        elif variant is Variant.TE_AUTOENCODER:
            for e, x in ((ea, xa), (ep, xp), (en, xn)):
                total += sq_dist(scalar_decode(params, e), x)
    layers = range(k) if variant is Variant.TRIPLET_ONLY else range(len(params.dims) - 1)
    penalty = 0.0
    for l in layers:
        for v in params.weights[l].ravel():
            penalty += float(v) ** 2
    return total + cfg.l2_weight * penalty


def finite_difference_grads(params: NetworkParams, batch: Batch, cfg: TrainConfig, h=1e-4):
    """Central differences of total_loss for every scalar parameter."""
    probe = params.copy()
    out = []
    for arr in probe.arrays():
        g = np.zeros_like(arr)
        flat, gflat = arr.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + h
            up = total_loss(probe, batch, cfg)
            flat[i] = keep - h
            down = total_loss(probe, batch, cfg)
            flat[i] = keep
            gflat[i] = (up - down) / (2 * h)
        out.append(g)
    return out


def max_relative_error(analytic, numeric, floor=1e-6):
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
        worst = max(worst, float(np.max(np.abs(a - n) / denom)) if a.size else 0.0)
    return worst


def brute_nearest(query, refs):
    """Exhaustive scan, strict < so the first (lowest index) minimum wins."""
    best, best_d = -1, math.inf
    for i, r in enumerate(refs):
        d = 0.0
        for a, b in zip(query, r):
            d += (float(a) - float(b)) ** 2
        if d < best_d:
            best, best_d = i, d
    return best


def kink_distance(params, batch, margin):
    """Smallest distance of any PReLU input, hinge argument or triplet distance to its kink."""
    from behavior_manifold.model.network import forward_layers

    x = np.vstack([batch.xa, batch.xp, batch.xn])
    _, caches = forward_layers(params, x, 0, params.n_layers)
    closest = min(float(np.abs(c.pre).min()) for c in caches[:-1])
    emb, _ = forward_layers(params, x, 0, params.bottleneck)
    ea, ep, en = np.split(emb, 3)
    d_ap, d_an = np.linalg.norm(ea - ep, axis=1), np.linalg.norm(ea - en, axis=1)
    hinge = margin + d_ap - d_an
    return min(closest, float(np.abs(hinge).min()), float(d_ap.min()), float(d_an.min()))


def random_instance(rng, variant, dims=(6, 5, 3, 5, 6), n=4, margin=2.0, clearance=1e-2):
    """Random toy network and batch at least ``clearance`` away from every kink.

    Central differences are only meaningful where the loss is smooth within
    the probe step, so draws landing next to a PReLU or hinge corner are redrawn.
    """
    from behavior_manifold.model import init_params

    while True:
        params = init_params(dims, variant, seed=int(rng.integers(2**31)))
        for b in params.biases:
            b[:] = rng.normal(scale=0.1, size=b.shape)
        params.slopes[:] = rng.uniform(0.05, 0.5, size=params.slopes.shape)
        batch = Batch(*[rng.normal(size=(n, dims[0])) for _ in range(4)])
        if kink_distance(params, batch, margin) >= clearance:
            return params, batch
