"""Domain definitions: parameter layout, bounds, repair, simulation and measures."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .qd.archive import PRESETS, ArchiveSpec
from .repair import RepairProblem, is_valid, repair, repair_teleop
from .sim.collab import CollabConfig, simulate_collab
from .sim.outcome import SimOutcome
from .sim.teleop import NOISE_CAP, TeleopConfig, simulate_teleop

DOMAINS = ("teleop", "teleop-blend", "collab-I", "collab-II", "collab-I-human-search",
           "collab-I-success")
# Human rationality is stored in thousands so every parameter has unit-order scale.
HUMAN_BETA_SCALE = 1000.0
HUMAN_BETA_RANGE = (0.5, 5.0)
V_MULT_RANGE = (0.8, 1.5)


@dataclass
class Evaluation:
    """A repaired and simulated scenario."""
    theta: np.ndarray           # repaired parameters
    f: float                    # raw objective
    m: np.ndarray               # archive measures
    displacement: float
    grids: np.ndarray
    outcome: SimOutcome
    repair: dict = field(default_factory=dict)      # decision record for the run log


@dataclass
class Domain:
    name: str
    kind: str                   # "teleop" or "collab"
    lows: np.ndarray
    highs: np.ndarray
    archive: ArchiveSpec
    cap: float
    sigma_me: np.ndarray        # MAP-Elites per-parameter noise
    sigma0: float               # CMA-ES / coefficient initial step
    channels: int
    measure_idx: tuple = (0, 1)
    success: bool = False
    human_search: bool = False
    teleop: TeleopConfig = field(default_factory=TeleopConfig)
    collab: CollabConfig = field(default_factory=CollabConfig)

    @property
    def dim(self) -> int:
        return len(self.lows)

    @property
    def n_goals(self) -> int:
        return 2 if self.kind == "teleop" else 3

    # -- sampling -------------------------------------------------------
    def sample(self, rng) -> np.ndarray:
        """One random scenario from the valid region."""
        if self.kind == "teleop":
            return rng.uniform(self.lows, self.highs)
        regions = self.collab.regions
        a = self.collab.half_side
        goals = None
        for _ in range(100):
            goals = np.array([_in_region(regions[rng.integers(len(regions))], rng)
                              for _ in range(self.n_goals)])
            if is_valid(RepairProblem(list(regions), goals, a), goals):
                break
        theta = goals.ravel()
        if self.human_search:
            theta = np.r_[theta, rng.uniform(HUMAN_BETA_RANGE[0], HUMAN_BETA_RANGE[1]),
                          rng.uniform(V_MULT_RANGE[0], V_MULT_RANGE[1])]
        return theta

    # -- repair ---------------------------------------------------------
    def repair(self, theta):
        """Return ``(repaired theta, displacement sum)``."""
        out, disp, _ = self.repair_with_record(theta)
        return out, disp

    def repair_with_record(self, theta):
        """Like :meth:`repair`, plus a dict describing the decision taken."""
        theta = np.asarray(theta, dtype=np.float64)
        if self.kind == "teleop":
            out, disp = repair_teleop(theta, self.teleop.workspace, self.teleop.noise_cap)
            return out, disp, {"cost": float(np.sum((out - theta) ** 2)), "displacement": disp}
        goals = theta[:6].reshape(3, 2)
        res = repair(RepairProblem(list(self.collab.regions), goals, self.collab.half_side))
        out = theta.copy()
        out[:6] = res.positions.ravel()
        if self.human_search:
            out[6] = np.clip(out[6], *HUMAN_BETA_RANGE)
            out[7] = np.clip(out[7], *V_MULT_RANGE)
        record = {"cost": res.cost, "displacement": res.displacement}
        if res.assignment is not None:
            record["regions"] = list(res.assignment.regions)
            record["sides"] = list(res.assignment.sides)
        return out, res.displacement, record

    # -- simulation -----------------------------------------------------
    def simulate(self, theta, seed: int = 0, record: bool = False) -> SimOutcome:
        theta = np.asarray(theta, dtype=np.float64)
        if self.kind == "teleop":
            return simulate_teleop(theta, self.teleop, record=record)
        cfg = self.collab
        if self.human_search:
            cfg = replace(cfg, human_beta=float(theta[6]) * HUMAN_BETA_SCALE, v_mult=float(theta[7]))
        return simulate_collab(theta[:6], cfg, seed=seed, record=record)

    def objective(self, outcome: SimOutcome) -> float:
        return self.cap - outcome.f if self.success else outcome.f

    def measures(self, outcome: SimOutcome) -> np.ndarray:
        return np.asarray(outcome.m, dtype=np.float64)[list(self.measure_idx)]

    def evaluate(self, theta, seed: int = 0, record: bool = False) -> Evaluation:
        """Repair then simulate one raw candidate."""
        fixed, disp, rec = self.repair_with_record(theta)
        out = self.simulate(fixed, seed, record)
        return Evaluation(fixed, float(self.objective(out)), self.measures(out), disp, out.grids, out,
                          rec)

    def regularizer(self, theta, weight: float) -> float:
        """Penalty used on surrogate predictions: weight times repair displacement."""
        if weight == 0:
            return 0.0
        return weight * self.repair(theta)[1]

    @property
    def search_scale(self) -> np.ndarray:
        """Per-parameter stretch that gives every range the width of the first one.

        Emitters searching the surrogate work on ``theta / search_scale`` so that
        step sizes and normalised gradients mean the same thing on every axis.
        """
        span = self.highs - self.lows
        return span / span[0]

    def scale(self, theta) -> np.ndarray:
        """Affine map of the parameter box onto [-1, 1]."""
        return 2.0 * (np.asarray(theta) - self.lows) / (self.highs - self.lows) - 1.0


def _in_region(r, rng):
    return [rng.uniform(r.x_min, r.x_max), rng.uniform(r.y_min, r.y_max)]


def make_domain(name: str, teleop: TeleopConfig | None = None,
                collab: CollabConfig | None = None) -> Domain:
    if name not in DOMAINS:
        raise ValueError(f"unknown domain {name!r}; choose from {', '.join(DOMAINS)}")
    if name.startswith("teleop"):
        cfg = teleop or TeleopConfig()
        if name == "teleop-blend":
            cfg = replace(cfg, blend=True)
        ws = cfg.workspace
        lows = np.r_[[ws.x_min, ws.y_min] * 2, np.zeros(cfg.n_noise)]
        highs = np.r_[[ws.x_max, ws.y_max] * 2, np.full(cfg.n_noise, cfg.noise_cap)]
        sigma = np.r_[np.full(4, 0.01), np.full(cfg.n_noise, 0.005)]
        return Domain(name, "teleop", lows, highs, PRESETS["teleop"], cfg.time_cap, sigma, 0.01, 1,
                      teleop=cfg)
    cfg = collab or CollabConfig()
    xs = [r.x_min for r in cfg.regions] + [r.x_max for r in cfg.regions]
    ys = [r.y_min for r in cfg.regions] + [r.y_max for r in cfg.regions]
    lows = np.array([min(xs), min(ys)] * 3)
    highs = np.array([max(xs), max(ys)] * 3)
    human_search = name == "collab-I-human-search"
    if human_search:
        lows = np.r_[lows, HUMAN_BETA_RANGE[0], V_MULT_RANGE[0]]
        highs = np.r_[highs, HUMAN_BETA_RANGE[1], V_MULT_RANGE[1]]
    spec = PRESETS["collab-II"] if name == "collab-II" else PRESETS["collab-I"]
    idx = (2, 3) if name == "collab-II" else (0, 1)
    return Domain(name, "collab", lows, highs, spec, cfg.cap, np.full(len(lows), 0.1), 1.0, 2,
                  measure_idx=idx, success=name == "collab-I-success", human_search=human_search,
                  collab=cfg)


__all__ = ["DOMAINS", "Domain", "Evaluation", "make_domain", "NOISE_CAP"]
