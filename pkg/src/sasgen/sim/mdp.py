"""Grid MDP for the collaborating human and its soft value iteration."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# 8-connected moves, fixed order used everywhere (including tie-breaks).
MOVES = np.array([(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)])
MOVE_COST = np.where(np.abs(MOVES).sum(axis=1) == 2, np.sqrt(2.0), 1.0)


@dataclass
class GridMDP:
    """Uniform grid over ``[x0, x0 + nx*cell] x [y0, y0 + ny*cell]``."""
    x0: float
    y0: float
    cell: float
    nx: int
    ny: int
    step_reward: float = -0.01
    obstacle_reward: float = -1.0
    goal_reward: float = 1.0
    gamma: float = 0.9999

    def cell_of(self, p) -> tuple:
        i = int(np.floor((p[0] - self.x0) / self.cell))
        j = int(np.floor((p[1] - self.y0) / self.cell))
        if not (0 <= i < self.nx and 0 <= j < self.ny):
            raise ValueError(f"position {tuple(p)} outside the grid")
        return i, j

    def centre(self, c) -> np.ndarray:
        return np.array([self.x0 + (c[0] + 0.5) * self.cell, self.y0 + (c[1] + 0.5) * self.cell])

    def successors(self):
        """(nx, ny, 8, 2) target cells and (nx, ny, 8) validity mask."""
        I, J = np.meshgrid(np.arange(self.nx), np.arange(self.ny), indexing="ij")
        tgt = np.stack([I, J], axis=-1)[:, :, None, :] + MOVES[None, None]
        valid = ((tgt[..., 0] >= 0) & (tgt[..., 0] < self.nx)
                 & (tgt[..., 1] >= 0) & (tgt[..., 1] < self.ny))
        return tgt, valid


def softmax_value_iteration(mdp: GridMDP, goal: tuple, obstacles=(), tau: float = 0.001,
                            tol: float = 1e-9, max_iter: int = 100_000):
    """Soft Bellman iteration for one goal cell.

    Returns ``(Q, V)`` with ``Q`` of shape (nx, ny, 8); moves leaving the
    grid get ``-inf``.  The goal is terminal (``V = 0``) and entering it pays
    the goal reward; entering an obstacle pays the obstacle reward.
    """
    tgt, valid = mdp.successors()
    ti = np.where(valid, tgt[..., 0], 0)
    tj = np.where(valid, tgt[..., 1], 0)
    is_goal = np.zeros((mdp.nx, mdp.ny), bool)
    is_goal[goal] = True
    is_obs = np.zeros((mdp.nx, mdp.ny), bool)
    for o in obstacles:
        if tuple(o) != tuple(goal):
            is_obs[tuple(o)] = True
    reward = np.where(is_obs[ti, tj], mdp.obstacle_reward, mdp.step_reward * MOVE_COST[None, None])
    reward = np.where(is_goal[ti, tj], mdp.goal_reward, reward)
    cont = np.where(valid & ~is_goal[ti, tj], mdp.gamma, 0.0)
    V = np.zeros((mdp.nx, mdp.ny))
    for _ in range(max_iter):
        Q = np.where(valid, reward + cont * V[ti, tj], -np.inf)
        mx = Q.max(axis=2)
        newV = mx + tau * np.log(np.exp((Q - mx[..., None]) / tau).sum(axis=2))
        newV[goal] = 0.0
        delta = np.max(np.abs(newV - V))
        V = newV
        if delta < tol:
            Q = np.where(valid, reward + cont * V[ti, tj], -np.inf)
            return Q, V
    raise RuntimeError("soft value iteration did not converge")


def next_cell(mdp: GridMDP, Q, cell, beta: float | None = None, rng=None) -> tuple:
    """Greedy (``beta is None``) or Boltzmann choice of the neighbouring cell."""
    q = Q[cell]
    if beta is None:
        a = int(np.argmax(q))
    else:
        z = beta * (q - q.max())
        p = np.exp(z)
        p /= p.sum()
        a = int(rng.choice(len(q), p=p))
    return int(cell[0] + MOVES[a, 0]), int(cell[1] + MOVES[a, 1])


def action_index(src, dst) -> int:
    d = (dst[0] - src[0], dst[1] - src[1])
    for a, m in enumerate(MOVES):
        if (m[0], m[1]) == d:
            return a
    raise ValueError(f"{src} -> {dst} is not a single move")
