"""Shared-control teleoperation: a waypoint-following human drives a 2-D end effector."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..repair import Region
from .belief import belief_update, teleop_advantages, uniform
from .occupancy import occupancy_grid
from .outcome import SimOutcome
from .policies import (human_action_teleop, robot_action_teleop_blend, robot_action_teleop_shared,
                       teleop_waypoints)

NOISE_CAP = 0.112 ** 2 / 5


@dataclass
class TeleopConfig:
    workspace: Region = Region(-0.2, 0.2, 0.2, 0.5)
    start: tuple = (0.0, 0.0)
    dt: float = 0.05
    human_speed: float = 0.10
    robot_speed: float = 0.20
    reach: float = 0.03
    cap: float = 10.0
    blend: bool = False
    blend_cap: float = 20.0
    threshold: float = 0.9
    beta: float = 5.0
    waypoint_tol: float = 0.01
    n_noise: int = 5
    noise_cap: float = NOISE_CAP
    grid_bounds: tuple = (-0.3, 0.3, -0.05, 0.55)
    grid_size: int = 32

    @property
    def time_cap(self) -> float:
        return self.blend_cap if self.blend else self.cap


def teleop_measures(theta) -> np.ndarray:
    """Goal distance and sqrt of the summed waypoint noise."""
    theta = np.asarray(theta, dtype=np.float64)
    g1, g2 = theta[0:2], theta[2:4]
    return np.array([np.linalg.norm(g1 - g2), np.sqrt(max(float(np.sum(theta[4:])), 0.0))])


def simulate_teleop(theta, config: TeleopConfig | None = None, record: bool = False) -> SimOutcome:
    """Run one episode; ``f`` is the time for the robot to reach the first goal."""
    cfg = config or TeleopConfig()
    theta = np.asarray(theta, dtype=np.float64)
    goals = theta[:4].reshape(2, 2)
    start = np.asarray(cfg.start, dtype=np.float64)
    wps = teleop_waypoints(start, goals[0], theta[4:4 + cfg.n_noise])
    x = start.copy()
    b = uniform(2)
    wp_idx, latched = 0, None
    cap = cfg.time_cap
    n_max = int(round(cap / cfg.dt))
    positions = [x.copy()]
    trace = []
    f = cap
    for k in range(n_max + 1):
        t = k * cfg.dt
        if np.linalg.norm(x - goals[0]) <= cfg.reach:
            f = t
            break
        if k == n_max:
            break
        u, wp_idx = human_action_teleop(x, wps, wp_idx, cfg.human_speed, start, cfg.waypoint_tol)
        b = belief_update(b, teleop_advantages(x, u, goals, cfg.dt), cfg.beta)
        if cfg.blend:
            v, latched = robot_action_teleop_blend(b, u, x, goals, cfg.robot_speed, cfg.threshold, latched)
        else:
            v = robot_action_teleop_shared(b, x, goals, cfg.robot_speed)
        if record:
            trace.append({"t": t, "robot": x.tolist(), "input": u.tolist(), "belief": b.tolist(),
                          "waypoint": wp_idx, "latched": latched})
        x = x + v * cfg.dt
        if not np.all(np.isfinite(x)):
            raise FloatingPointError(f"non-finite robot state at t={t}")
        positions.append(x.copy())
    grid = occupancy_grid(np.array(positions), cfg.grid_bounds, cfg.grid_size)
    return SimOutcome(float(f), teleop_measures(theta), grid[None], trace,
                      {"ticks": len(positions) - 1, "final_belief": b.tolist()})
