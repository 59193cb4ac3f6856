from __future__ import annotations

import numpy as np

from .layers import LeakyReLU, ReLU


def relu_pattern(net, acts) -> np.ndarray:
    """Sign pattern of every ReLU / LeakyReLU input in a forward pass."""
    if hasattr(net, "relu_pattern"):
        return net.relu_pattern(acts)
    parts = [acts[i] > 0 for i, layer in enumerate(net.layers)
             if isinstance(layer, (ReLU, LeakyReLU))]
    return np.concatenate([p.ravel() for p in parts]) if parts else np.zeros(0, bool)


def finite_diff_check(net, x, eps: float = 1e-5, n_coords: int = 32, seed: int = 0,
                      training: bool = False, atol: float = 1e-6) -> float:
    """Max relative error between analytic and central-difference gradients.

    The scalar probed is ``sum(r * output)`` for a fixed random ``r``. At
    least ``n_coords`` input coordinates and ``n_coords`` parameter
    coordinates are checked (all of them when fewer exist). Coordinates
    whose +/- perturbations flip any ReLU sign are skipped since the
    function is not differentiable there.
    """
    if not 0.0 < eps <= 1e-2:
        raise ValueError("eps must lie in (0, 1e-2]")
    rng = np.random.default_rng(seed)
    x = np.array(x, dtype=np.float64)
    acts = net.forward(x, training=training, update_stats=False)
    r = rng.standard_normal(acts.output.shape)
    pgrads, xgrad = net.backward(acts, r)

    def value(xv):
        a = net.forward(xv, training=training, update_stats=False)
        return float((r * a.output).sum()), relu_pattern(net, a)

    worst = 0.0

    def compare(analytic, plus, minus):
        nonlocal worst
        (fp, sp), (fm, sm) = plus, minus
        if sp.shape == sm.shape and not np.array_equal(sp, sm):
            return
        numeric = (fp - fm) / (2 * eps)
        err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), atol)
        worst = max(worst, err)

    flat_x = x.reshape(-1)
    for i in rng.choice(flat_x.size, size=min(n_coords, flat_x.size), replace=False):
        old = flat_x[i]
        flat_x[i] = old + eps
        plus = value(x)
        flat_x[i] = old - eps
        minus = value(x)
        flat_x[i] = old
        compare(xgrad.reshape(-1)[i], plus, minus)

    params = net.parameters()
    sizes = np.array([p.size for p in params])
    total = int(sizes.sum())
    if total:
        picks = rng.choice(total, size=min(n_coords, total), replace=False)
        offsets = np.concatenate([[0], np.cumsum(sizes)])
        for flat in picks:
            k = int(np.searchsorted(offsets, flat, side="right") - 1)
            j = flat - offsets[k]
            p = params[k].reshape(-1)
            old = p[j]
            p[j] = old + eps
            plus = value(x)
            p[j] = old - eps
            minus = value(x)
            p[j] = old
            compare(pgrads[k].reshape(-1)[j], plus, minus)
    return worst
