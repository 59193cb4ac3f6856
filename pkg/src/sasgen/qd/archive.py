"""Grid archives, addition rules and the QD-score."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ArchiveSpec:
    lows: tuple
    highs: tuple
    bins: tuple
    names: tuple = ()

    def __post_init__(self):
        if not (len(self.lows) == len(self.highs) == len(self.bins)):
            raise ValueError("lows, highs and bins must have equal length")
        for lo, hi, b in zip(self.lows, self.highs, self.bins):
            if not lo < hi:
                raise ValueError(f"archive range needs lo < hi, got [{lo}, {hi}]")
            if b < 1:
                raise ValueError("bins must be >= 1")

    @property
    def dims(self) -> int:
        return len(self.bins)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.bins))


PRESETS = {
    "teleop": ArchiveSpec((0.0, 0.0), (0.32, 0.112), (25, 100), ("goal_distance", "variation")),
    "collab-I": ArchiveSpec((0.05, 0.35), (0.32, 1.0), (27, 65),
                            ("min_goal_distance", "max_wrong_goal_probability")),
    "collab-II": ArchiveSpec((1.0, 0.0), (5.0, 5.0), (20, 50), ("robot_path_length", "wait_time")),
}


def cell_coords(spec: ArchiveSpec, m) -> tuple:
    """Per-dimension bin of measures ``m``; out-of-range values clamp to the edge bins."""
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (spec.dims,):
        raise ValueError(f"expected {spec.dims} measures, got shape {m.shape}")
    if np.any(np.isnan(m)):
        raise ValueError("NaN measure")
    out = []
    for v, lo, hi, b in zip(m, spec.lows, spec.highs, spec.bins):
        i = int(np.floor((v - lo) / (hi - lo) * b)) if np.isfinite(v) else (b - 1 if v > 0 else 0)
        out.append(min(max(i, 0), b - 1))
    return tuple(out)


def cell_index(spec: ArchiveSpec, m) -> int:
    """Flat row-major cell index."""
    return int(np.ravel_multi_index(cell_coords(spec, m), spec.bins))


def unravel(spec: ArchiveSpec, idx: int) -> tuple:
    return tuple(int(v) for v in np.unravel_index(idx, spec.bins))


@dataclass
class Elite:
    theta: np.ndarray
    f: float
    m: np.ndarray
    meta: dict = field(default_factory=dict)


class Archive:
    """Cell index -> elite map.  Soft archives also carry per-cell thresholds."""

    def __init__(self, spec: ArchiveSpec, soft: bool = False, alpha: float = 0.1, min_f: float = 0.0):
        if not 0.0 <= alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        self.spec = spec
        self.soft = soft
        self.alpha = alpha
        self.min_f = min_f
        self.cells: dict[int, Elite] = {}
        self.thresholds = np.full(spec.n_cells, min_f, dtype=np.float64) if soft else None

    def __len__(self):
        return len(self.cells)

    def __contains__(self, idx):
        return idx in self.cells

    def elites(self) -> list[tuple[int, Elite]]:
        """Occupied cells in ascending index order."""
        return sorted(self.cells.items())

    def sample_elites(self, rng, n: int, replace: bool = True) -> list[Elite]:
        keys = sorted(self.cells)
        if not keys:
            return []
        pick = rng.choice(len(keys), size=n if replace else min(n, len(keys)), replace=replace)
        return [self.cells[keys[i]] for i in pick]

    def clear(self):
        self.cells.clear()
        if self.soft:
            self.thresholds[:] = self.min_f


def add_map_elites(archive: Archive, theta, f: float, m, meta: dict | None = None) -> str:
    """Elitist insertion; equal objectives keep the incumbent."""
    idx = cell_index(archive.spec, m)
    cur = archive.cells.get(idx)
    if cur is not None and not f > cur.f:
        return "rejected"
    archive.cells[idx] = Elite(np.array(theta, dtype=np.float64), float(f),
                               np.array(m, dtype=np.float64), dict(meta or {}))
    return "inserted" if cur is None else "replaced"


def add_cma_mae(archive: Archive, theta, f: float, m, final: Archive | None = None,
                meta: dict | None = None, alpha: float | None = None) -> float:
    """Soft-threshold insertion.  Returns the improvement ``f - threshold``.

    ``final``, when given, receives the same offer under elitist rules
    whatever the soft archive decides.
    """
    if not archive.soft:
        raise ValueError("add_cma_mae needs a soft archive")
    alpha = archive.alpha if alpha is None else alpha
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    idx = cell_index(archive.spec, m)
    t = archive.thresholds[idx]
    delta = float(f - t)
    if f > t:
        archive.cells[idx] = Elite(np.array(theta, dtype=np.float64), float(f),
                                   np.array(m, dtype=np.float64), dict(meta or {}))
        # alpha = 1 must give t = f even from an infinite threshold (0 * inf is NaN).
        archive.thresholds[idx] = f if alpha == 1.0 else (1.0 - alpha) * t + alpha * f
    if final is not None:
        add_map_elites(final, theta, f, m, meta)
    return delta


def qd_score(archive: Archive) -> float:
    """Sum of stored objectives; empty cells count as zero."""
    return float(sum(e.f for _, e in archive.elites()))
