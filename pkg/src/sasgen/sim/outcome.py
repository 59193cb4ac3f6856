from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class SimOutcome:
    f: float
    m: np.ndarray
    grids: np.ndarray                 # (C, 32, 32): robot first, then human
    trace: list = field(default_factory=list)
    info: dict = field(default_factory=dict)
