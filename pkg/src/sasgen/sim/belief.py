"""Goal belief tracking for a noisily optimal human."""
from __future__ import annotations

import numpy as np


def belief_update(belief, advantages, beta: float) -> np.ndarray:
    """``b'(g) ~ b(g) exp(beta * (Q_g - V_g))``, computed in log space.

    ``advantages`` holds ``Q_g(x, u) - V_g(x)`` per goal.  A degenerate
    normaliser leaves the belief unchanged.
    """
    b = np.asarray(belief, dtype=np.float64)
    adv = np.asarray(advantages, dtype=np.float64)
    with np.errstate(divide="ignore"):
        logp = np.log(b) + beta * adv
    mx = np.max(logp)
    if not np.isfinite(mx):
        return b.copy()
    w = np.exp(logp - mx)
    total = w.sum()
    if not np.isfinite(total) or total <= 0:
        return b.copy()
    return w / total


def teleop_advantages(x, u, goals, dt: float) -> np.ndarray:
    """Distance-based values: ``V_g = -|x - g|``, ``Q_g = -|u| dt - |x + u dt - g|``."""
    x = np.asarray(x, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    goals = np.asarray(goals, dtype=np.float64)
    v = -np.linalg.norm(goals - x, axis=1)
    q = -np.linalg.norm(u) * dt - np.linalg.norm(x + u * dt - goals, axis=1)
    return q - v


def uniform(n: int, support=None) -> np.ndarray:
    """Uniform belief over ``support`` (all goals when None)."""
    b = np.zeros(n)
    idx = list(range(n)) if support is None else list(support)
    b[idx] = 1.0 / len(idx)
    return b
