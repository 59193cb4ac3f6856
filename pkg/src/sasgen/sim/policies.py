"""Human and robot action rules for both domains."""
from __future__ import annotations

import numpy as np

from .mdp import next_cell


def _unit(v) -> np.ndarray:
    n = np.linalg.norm(v)
    return v / n if n > 1e-12 else np.zeros_like(v)


def teleop_waypoints(start, goal, noise) -> np.ndarray:
    """Interior waypoints on start->goal displaced sideways, then the goal.

    Waypoint ``i`` sits at fraction ``i / (len(noise) + 1)`` of the segment
    and is pushed along the left normal by ``+-sqrt(noise[i])`` with
    alternating sign, so the displacement norm is ``sqrt(sum(noise))``.
    """
    start = np.asarray(start, dtype=np.float64)
    goal = np.asarray(goal, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    k = len(noise)
    axis = goal - start
    normal = _unit(np.array([-axis[1], axis[0]]))
    signs = np.where(np.arange(k) % 2 == 0, 1.0, -1.0)
    fr = np.arange(1, k + 1) / (k + 1)
    pts = start + fr[:, None] * axis + (signs * np.sqrt(np.maximum(noise, 0.0)))[:, None] * normal
    return np.vstack([pts, goal])


def human_action_teleop(position, waypoints, index: int, speed: float, start=None,
                        tol: float = 0.01) -> tuple[np.ndarray, int]:
    """Joystick velocity toward the waypoint-to-go; returns ``(u, new_index)``.

    A waypoint counts as visited within ``tol`` metres, or once the position
    has progressed past it along the start->goal axis (when ``start`` given).
    """
    x = np.asarray(position, dtype=np.float64)
    last = len(waypoints) - 1
    if start is not None:
        axis = waypoints[-1] - np.asarray(start)
        L2 = float(axis @ axis)
    while index < last:
        wp = waypoints[index]
        if np.linalg.norm(wp - x) <= tol:
            index += 1
            continue
        if start is not None and L2 > 0 and (x - start) @ axis >= (wp - start) @ axis:
            index += 1
            continue
        break
    return speed * _unit(waypoints[index] - x), index


def robot_action_teleop_shared(belief, position, goals, speed: float, guard: float = 1e-9) -> np.ndarray:
    """Belief-weighted average of straight-line directions to each goal."""
    x = np.asarray(position, dtype=np.float64)
    v = np.zeros(2)
    for b, g in zip(belief, np.asarray(goals, dtype=np.float64)):
        d = g - x
        n = np.linalg.norm(d)
        if n > guard:
            v += b * d / n
    return speed * v


def robot_action_teleop_blend(belief, u, position, goals, speed: float, threshold: float = 0.9,
                              latched: int | None = None) -> tuple[np.ndarray, int | None]:
    """Pass the human input through until one goal's belief exceeds ``threshold``.

    Returns ``(velocity, latched_goal)``; once latched the robot heads straight
    for that goal for the rest of the episode.
    """
    if not 0.5 < threshold < 1.0:
        raise ValueError("threshold must lie in (0.5, 1)")
    b = np.asarray(belief)
    if latched is None and b.max() > threshold:
        latched = int(np.argmax(b))
    if latched is None:
        return np.asarray(u, dtype=np.float64).copy(), None
    d = np.asarray(goals[latched], dtype=np.float64) - np.asarray(position, dtype=np.float64)
    n = np.linalg.norm(d)
    step = speed * d / n if n > 1e-9 else np.zeros(2)
    return step, latched


def feasible_goal_sets(robot_unworked, candidates) -> dict:
    """Per candidate human goal: unworked robot goals other than it (or all if none left)."""
    out = {}
    for g in candidates:
        s = [r for r in sorted(robot_unworked) if r != g]
        out[g] = s if s else sorted(robot_unworked)
    return out


def goal_to_go_map(feasible: dict, robot_position, goals) -> dict:
    """Nearest feasible goal per candidate; ties go to the lowest index."""
    x = np.asarray(robot_position, dtype=np.float64)
    goals = np.asarray(goals, dtype=np.float64)
    F = {}
    for g, s in feasible.items():
        if not s:
            raise ValueError(f"empty feasible set for goal {g}")
        d = [np.linalg.norm(goals[r] - x) for r in s]
        F[g] = s[int(np.argmin(d))]
    return F


def goal_weights(belief, F: dict) -> dict:
    """Weight per goal-to-go: belief mass of candidates mapped to it."""
    w = {}
    for g, target in F.items():
        w[target] = w.get(target, 0.0) + float(belief[g])
    return w


def robot_action_collab(belief, F: dict, goals, robot_position, speed: float) -> np.ndarray:
    """Weighted straight-line action over goals-to-go."""
    x = np.asarray(robot_position, dtype=np.float64)
    goals = np.asarray(goals, dtype=np.float64)
    v = np.zeros(2)
    for target, w in sorted(goal_weights(belief, F).items()):
        v += w * _unit(goals[target] - x)
    return speed * v


def human_action_collab(position, target_cell, mdp, Q, speed: float, beta: float | None = None,
                        rng=None, goal=None) -> tuple[np.ndarray, tuple]:
    """Velocity toward the centre of the next cell.

    ``target_cell`` is the cell currently being walked to (``None`` means
    choose afresh from the current cell).  Returns ``(velocity, target_cell)``.
    """
    x = np.asarray(position, dtype=np.float64)
    cur = mdp.cell_of(x)
    if target_cell is None:
        target_cell = next_cell(mdp, Q, cur, beta, rng)
    aim = np.asarray(goal) if goal is not None and mdp.cell_of(goal) == target_cell else mdp.centre(target_cell)
    return speed * _unit(aim - x), target_cell
