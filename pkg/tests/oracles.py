"""Independent reference implementations used only by the tests."""
from __future__ import annotations

import itertools

import numpy as np

GRID = 0.005


def lattice_points(regions, centre, radius, step=GRID):
    """Lattice points (multiples of ``step``) inside any region within ``radius``."""
    pts = []
    for r in regions:
        xs = np.arange(np.ceil(r.x_min / step - 1e-9), np.floor(r.x_max / step + 1e-9) + 1) * step
        ys = np.arange(np.ceil(r.y_min / step - 1e-9), np.floor(r.y_max / step + 1e-9) + 1) * step
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        P = np.stack([X.ravel(), Y.ravel()], axis=1)
        P = P[np.linalg.norm(P - centre, axis=1) <= radius]
        pts.append(P)
    P = np.unique(np.round(np.concatenate(pts) / step).astype(np.int64), axis=0)
    return P * step


def grid_repair_cost(regions, positions, half_sides, radius):
    """Brute-force minimum squared edit over lattice placements near the originals."""
    positions = np.asarray(positions, dtype=np.float64)
    n = len(positions)
    cands = [lattice_points(regions, positions[i], radius) for i in range(n)]
    costs = [np.sum((c - positions[i]) ** 2, axis=1) for i, c in enumerate(cands)]
    a = np.broadcast_to(np.asarray(half_sides, float), (n,))

    def apart(P, Q, d):
        # P (..., 2), Q (..., 2): separated on some axis by at least d
        return np.maximum(np.abs(P[..., 0] - Q[..., 0]), np.abs(P[..., 1] - Q[..., 1])) >= d - 1e-12

    best = np.inf
    if n == 1:
        return float(costs[0].min())
    if n == 2:
        ok = apart(cands[0][:, None], cands[1][None], a[0] + a[1])
        tot = costs[0][:, None] + costs[1][None]
        return float(np.where(ok, tot, np.inf).min())
    assert n == 3
    ok12 = apart(cands[1][:, None], cands[2][None], a[1] + a[2])
    c12 = np.where(ok12, costs[1][:, None] + costs[2][None], np.inf)
    for p0, c0 in zip(cands[0], costs[0]):
        if c0 >= best:
            continue
        m1 = apart(p0, cands[1], a[0] + a[1])
        m2 = apart(p0, cands[2], a[0] + a[2])
        sub = c12[np.ix_(m1, m2)]
        if sub.size:
            best = min(best, c0 + float(sub.min()))
    return best


def random_repair_instance(rng, regions, n=3, half=0.03, jitter=0.012):
    """Valid placement inside the regions, then a small random perturbation."""
    while True:
        pos = []
        for _ in range(n):
            r = regions[rng.integers(len(regions))]
            pos.append([rng.uniform(r.x_min, r.x_max), rng.uniform(r.y_min, r.y_max)])
        pos = np.array(pos)
        ok = all(np.max(np.abs(pos[i] - pos[j])) >= 2 * half for i, j in itertools.combinations(range(n), 2))
        if ok:
            return pos + rng.normal(0, jitter, size=pos.shape)


def soft_value_iteration_oracle(width, height, goal, obstacles=(), gamma=0.9999, tau=0.001,
                                step=-0.01, obstacle_reward=-1.0, goal_reward=1.0, tol=1e-12):
    """Plain-loop soft Bellman iteration on a width x height grid.

    States are (i, j); actions are the 8 neighbour moves; moves off the grid
    are unavailable.  Entering the goal pays ``goal_reward`` and ends the
    episode, entering an obstacle pays ``obstacle_reward``.
    """
    moves = [(di, dj) for di in (-1, 0, 1) for dj in (-1, 0, 1) if (di, dj) != (0, 0)]
    V = {(i, j): 0.0 for i in range(width) for j in range(height)}
    obstacles = set(obstacles)
    while True:
        Q = {}
        for s in V:
            if s == goal:
                continue
            for m in moves:
                t = (s[0] + m[0], s[1] + m[1])
                if t not in V:
                    continue
                if t == goal:
                    Q[s, m] = goal_reward
                    continue
                r = obstacle_reward if t in obstacles else step * (2 ** 0.5 if m[0] and m[1] else 1.0)
                Q[s, m] = r + gamma * V[t]
        newV = {}
        for s in V:
            if s == goal:
                newV[s] = 0.0
                continue
            qs = [Q[s, m] for m in moves if (s, m) in Q]
            mx = max(qs)
            newV[s] = mx + tau * np.log(sum(np.exp((q - mx) / tau) for q in qs))
        delta = max(abs(newV[s] - V[s]) for s in V)
        V = newV
        if delta < tol:
            return Q, V


def king_distance_cost(a, b, step=0.01):
    """Cheapest 8-connected path cost with orthogonal cost 1 and diagonal sqrt(2)."""
    dx, dy = abs(a[0] - b[0]), abs(a[1] - b[1])
    return step * ((2 ** 0.5) * min(dx, dy) + abs(dx - dy))
