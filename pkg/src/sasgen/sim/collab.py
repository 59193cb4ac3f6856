"""Shared-workspace collaboration: a grid-MDP human and a goal-inferring robot."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from ..repair import Region
from .belief import belief_update, uniform
from .mdp import GridMDP, action_index, softmax_value_iteration
from .occupancy import occupancy_grid
from .outcome import SimOutcome
from .policies import (feasible_goal_sets, goal_to_go_map, goal_weights, human_action_collab,
                       robot_action_collab)

MOVING, REPLANNING, WAITING, WORKING, RESETTING, DONE = (
    "moving", "replanning", "waiting", "working", "resetting", "done")


@dataclass
class CollabConfig:
    regions: tuple = (Region(-0.5, -0.1, 0.3, 0.7), Region(0.1, 0.5, 0.3, 0.7))
    robot_home: tuple = (0.0, 0.85)
    human_start: tuple = (0.0, 0.05)
    dt: float = 0.05
    human_speed: float = 0.10
    robot_speed: float = 0.20
    t_work: float = 5.0
    t_reset: float = 2.0
    reach: float = 0.03
    cap: float = 100.0
    beta: float = 200.0
    cell: float = 0.06
    grid_origin: tuple = (-0.54, 0.0)
    grid_shape: tuple = (18, 13)
    tau: float = 0.001
    gamma: float = 0.9999
    replan_center: tuple = (0.0, 0.5)
    replan_radius: float = 0.10
    occupancy_bounds: tuple = (-0.6, 0.6, 0.0, 0.9)
    grid_size: int = 32
    human_beta: float | None = None
    v_mult: float = 1.0
    half_side: float = 0.03

    def mdp(self) -> GridMDP:
        return GridMDP(self.grid_origin[0], self.grid_origin[1], self.cell,
                       self.grid_shape[0], self.grid_shape[1], gamma=self.gamma)


@dataclass
class _Agent:
    pos: np.ndarray
    state: str = MOVING
    goal: int | None = None
    timer: float = 0.0
    reset_from: np.ndarray | None = None
    done_goals: set = field(default_factory=set)


def min_goal_distance(goals) -> float:
    goals = np.asarray(goals, dtype=np.float64)
    return float(min(np.linalg.norm(goals[i] - goals[j]) for i, j in combinations(range(len(goals)), 2)))


def human_q_tables(goals, cfg: CollabConfig):
    """One soft Q table per goal with the other goals as obstacles."""
    mdp = cfg.mdp()
    cells = [mdp.cell_of(g) for g in goals]
    tables = []
    for i, c in enumerate(cells):
        others = [o for j, o in enumerate(cells) if j != i]
        tables.append(softmax_value_iteration(mdp, c, others, tau=cfg.tau))
    return mdp, cells, tables


def simulate_collab(goals, config: CollabConfig | None = None, seed: int = 0,
                    record: bool = False) -> SimOutcome:
    """Run one episode.

    Returns ``f`` = completion time (cap when unfinished) and the measure
    vector ``(min goal distance, max wrong-goal probability, robot path
    length, total wait time)``.
    """
    cfg = config or CollabConfig()
    rng = np.random.default_rng(seed)
    goals = np.asarray(goals, dtype=np.float64).reshape(-1, 2)
    n = len(goals)
    mdp, cells, tables = human_q_tables(goals, cfg)
    home = np.asarray(cfg.robot_home, dtype=np.float64)
    hstart = np.asarray(cfg.human_start, dtype=np.float64)
    zone = np.asarray(cfg.replan_center, dtype=np.float64)
    hspeed = cfg.human_speed * cfg.v_mult

    human = _Agent(hstart.copy(), MOVING, 0)
    robot = _Agent(home.copy(), MOVING, None)
    lock: dict[int, str] = {}
    belief = uniform(n, range(n))
    h_target = None
    replanned = False
    F_now: dict = {}

    h_path, r_path = [human.pos.copy()], [robot.pos.copy()]
    trace = []
    wait_time = 0.0
    # The uniform prior already counts toward the wrong-goal maximum.
    wrong_max = max((belief[c] for c in range(n) if c != human.goal), default=0.0)
    path_len = 0.0
    replans = 0
    n_max = int(round(cfg.cap / cfg.dt))
    finish = None

    def candidates():
        return sorted(set(range(n)) - human.done_goals)

    for k in range(n_max + 1):
        t = k * cfg.dt
        if human.state == DONE and robot.state == DONE:
            finish = t
            break
        if k == n_max:
            break

        # Human phase.
        if human.state == MOVING:
            g = human.goal
            if np.linalg.norm(human.pos - goals[g]) <= cfg.reach:
                human.state = WAITING if lock.get(g) == "robot" else WORKING
                if human.state == WORKING:
                    lock[g] = "human"
                    human.timer = cfg.t_work
            else:
                Q = tables[g][0]
                if h_target is None:
                    src = mdp.cell_of(human.pos)
                    _, h_target = human_action_collab(human.pos, None, mdp, Q, hspeed, cfg.human_beta,
                                                      rng, goals[g])
                    a = action_index(src, h_target)
                    adv = np.zeros(n)
                    for c in candidates():
                        Qc, Vc = tables[c]
                        adv[c] = Qc[src][a] - Vc[src]
                    belief = belief_update(belief, adv, cfg.beta)
                vel, _ = human_action_collab(human.pos, h_target, mdp, Q, hspeed, goal=goals[g])
                aim = goals[g] if h_target == cells[g] else mdp.centre(h_target)
                if np.linalg.norm(aim - human.pos) <= hspeed * cfg.dt:
                    human.pos = aim.copy()
                    if h_target != cells[g]:
                        h_target = None
                else:
                    human.pos = human.pos + vel * cfg.dt
            cand = candidates()
            others = [belief[c] for c in cand if c != human.goal]
            wrong_max = max(wrong_max, max(others) if others else 0.0)
        elif human.state == WAITING:
            g = human.goal
            if g not in lock:
                lock[g] = "human"
                human.state, human.timer = WORKING, cfg.t_work
        elif human.state == WORKING:
            human.timer -= cfg.dt
            if human.timer <= 1e-9:
                g = human.goal
                human.done_goals.add(g)
                lock.pop(g, None)
                cand = candidates()
                if cand:
                    belief = uniform(n, cand)
                    human.state, human.timer = RESETTING, cfg.t_reset
                    human.reset_from = human.pos.copy()
                else:
                    belief = np.zeros(n)
                    human.state = DONE
        elif human.state == RESETTING:
            human.timer -= cfg.dt
            frac = min(max(1.0 - human.timer / cfg.t_reset, 0.0), 1.0)
            human.pos = human.reset_from + frac * (hstart - human.reset_from)
            if human.timer <= 1e-9:
                human.pos = hstart.copy()
                human.state = MOVING
                human.goal = candidates()[0]
                h_target = None

        # Robot phase.
        r_prev = robot.pos.copy()
        unworked = sorted(set(range(n)) - robot.done_goals)
        if robot.state == MOVING:
            cand = candidates() if human.state != DONE else []
            if cand:
                F = goal_to_go_map(feasible_goal_sets(unworked, cand), robot.pos, goals)
                bel = belief
            else:
                nearest = min(unworked, key=lambda r: (np.linalg.norm(goals[r] - robot.pos), r))
                F, bel = {nearest: nearest}, uniform(n, [nearest])
            F_now = F
            w = goal_weights(bel, F)
            target = max(sorted(w), key=lambda r: w[r])
            robot.goal = target
            if np.linalg.norm(robot.pos - goals[target]) <= cfg.reach:
                if lock.get(target) == "human":
                    robot.state = WAITING
                else:
                    lock[target] = "robot"
                    robot.state, robot.timer = WORKING, cfg.t_work
            else:
                v = robot_action_collab(bel, F, goals, robot.pos, cfg.robot_speed)
                robot.pos = robot.pos + v * cfg.dt
                if not replanned and np.linalg.norm(robot.pos - zone) < cfg.replan_radius:
                    replanned = True
                    replans += 1
                    robot.state = REPLANNING
        elif robot.state == REPLANNING:
            d = home - robot.pos
            dist = np.linalg.norm(d)
            step = cfg.robot_speed * cfg.dt
            if dist <= step:
                robot.pos = home.copy()
                robot.state = MOVING
            else:
                robot.pos = robot.pos + d / dist * step
        elif robot.state == WAITING:
            g = robot.goal
            if g not in lock:
                lock[g] = "robot"
                robot.state, robot.timer = WORKING, cfg.t_work
        elif robot.state == WORKING:
            robot.timer -= cfg.dt
            if robot.timer <= 1e-9:
                g = robot.goal
                robot.done_goals.add(g)
                lock.pop(g, None)
                if len(robot.done_goals) == n:
                    robot.state = DONE
                else:
                    robot.state, robot.timer = RESETTING, cfg.t_reset
                    robot.reset_from = robot.pos.copy()
        elif robot.state == RESETTING:
            robot.timer -= cfg.dt
            frac = min(max(1.0 - robot.timer / cfg.t_reset, 0.0), 1.0)
            robot.pos = robot.reset_from + frac * (home - robot.reset_from)
            if robot.timer <= 1e-9:
                robot.pos = home.copy()
                robot.state = MOVING
                replanned = False

        if human.state == WAITING or robot.state == WAITING:
            wait_time += cfg.dt
        if not (np.all(np.isfinite(robot.pos)) and np.all(np.isfinite(human.pos))):
            raise FloatingPointError(f"non-finite state at t={t}")
        path_len += float(np.linalg.norm(robot.pos - r_prev))
        h_path.append(human.pos.copy())
        r_path.append(robot.pos.copy())
        if record:
            trace.append({"t": round(t, 10), "human": human.pos.tolist(), "robot": robot.pos.tolist(),
                          "human_state": human.state, "robot_state": robot.state,
                          "human_goal": human.goal, "robot_goal": robot.goal,
                          "belief": belief.tolist(),
                          "goal_to_go": {str(g): int(r) for g, r in sorted(F_now.items())}})
    f = cfg.cap if finish is None else min(float(finish), cfg.cap)
    m = np.array([min_goal_distance(goals), wrong_max, path_len, wait_time])
    grids = np.stack([occupancy_grid(np.array(r_path), cfg.occupancy_bounds, cfg.grid_size),
                      occupancy_grid(np.array(h_path), cfg.occupancy_bounds, cfg.grid_size)])
    return SimOutcome(f, m, grids, trace,
                      {"ticks": len(r_path) - 1, "replans": replans, "wait_time": wait_time,
                       "wrong_goal_max": wrong_max, "completed": human.state == DONE and robot.state == DONE})
