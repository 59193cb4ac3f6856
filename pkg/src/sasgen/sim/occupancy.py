"""Time-fraction occupancy grids."""
from __future__ import annotations

import numpy as np


def occupancy_grid(positions, bounds, size: int = 32, weights=None) -> np.ndarray:
    """Fraction of samples (or of ``weights``) per cell of a ``size`` x ``size`` grid.

    ``bounds = (x_min, x_max, y_min, y_max)``.  Row index follows x, column
    index follows y; positions outside the bounds are clamped to the edge.
    """
    p = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
    if len(p) == 0:
        raise ValueError("empty trajectory")
    x0, x1, y0, y1 = bounds
    i = np.clip(np.floor((p[:, 0] - x0) / (x1 - x0) * size).astype(int), 0, size - 1)
    j = np.clip(np.floor((p[:, 1] - y0) / (y1 - y0) * size).astype(int), 0, size - 1)
    w = np.ones(len(p)) if weights is None else np.asarray(weights, dtype=np.float64)
    grid = np.zeros((size, size))
    np.add.at(grid, (i, j), w)
    return grid / grid.sum()
