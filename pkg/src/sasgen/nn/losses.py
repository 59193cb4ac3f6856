from __future__ import annotations

import numpy as np

_TINY = 1e-300


def loss_kl(pred, target):
    """KL(target || pred) summed over the cells and channels of each sample.

    ``pred`` and ``target`` are (B, ...) arrays holding one or more
    distributions per sample. Returns the batch-mean loss and its gradient w.r.t. ``pred``.
    Cells where the target is zero contribute nothing.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    if (pred < 0).any() or (target < 0).any():
        raise ValueError("loss_kl requires nonnegative grids")
    b = pred.shape[0]
    p = np.maximum(pred, _TINY)
    pos = target > 0
    terms = np.zeros_like(target)
    terms[pos] = target[pos] * (np.log(target[pos]) - np.log(p[pos]))
    loss = terms.sum() / b
    grad = -target / p / b
    return float(loss), grad


def loss_mse(pred, target):
    """Mean of squared differences over all entries, with its gradient."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {target.shape}")
    diff = pred - target
    n = diff.size
    return float((diff ** 2).sum() / n), 2.0 * diff / n
