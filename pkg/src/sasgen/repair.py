"""Exact minimum-edit repair of object placements.

Objects are axis-aligned squares (centre, half side).  A placement is valid
when every centre lies inside some rectangular region and no two squares
overlap.  The mixed-integer program is solved exactly by enumerating the
binaries: one region per object and one separation side per pair.  With the
binaries fixed the problem splits into an x and a y problem, each of the form

    min sum_i (x_i - a_i)^2   s.t.  l_i <= x_i <= u_i,   x_j - x_i >= d_ij

which is solved exactly by enumerating spanning forests of the active
difference constraints (see ``solve_axis``).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

SIDES = ("left", "right", "down", "up")
TOL = 1e-9
MAX_OBJECTS = 4
MAX_REGIONS = 4


@dataclass(frozen=True)
class Region:
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"degenerate region {self}")

    def contains(self, p, tol: float = TOL) -> bool:
        return (self.x_min - tol <= p[0] <= self.x_max + tol
                and self.y_min - tol <= p[1] <= self.y_max + tol)

    def project(self, p) -> np.ndarray:
        return np.array([min(max(p[0], self.x_min), self.x_max),
                         min(max(p[1], self.y_min), self.y_max)])


@dataclass
class RepairProblem:
    regions: list
    positions: np.ndarray          # (n, 2) original centres
    half_sides: np.ndarray         # (n,)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 2)
        self.half_sides = np.broadcast_to(
            np.asarray(self.half_sides, dtype=np.float64), (len(self.positions),)).copy()
        if np.any(self.half_sides <= 0):
            raise ValueError("half sides must be positive")

    @property
    def n(self) -> int:
        return len(self.positions)

    @property
    def pairs(self):
        return list(itertools.combinations(range(self.n), 2))


@dataclass(frozen=True)
class Assignment:
    regions: tuple      # region index per object
    sides: tuple        # side per pair, pairs in itertools.combinations order


@dataclass
class RepairResult:
    positions: np.ndarray
    cost: float
    displacement: float
    assignment: Assignment | None = None
    extra: dict = field(default_factory=dict)


def enumerate_assignments(problem: RepairProblem) -> list[Assignment]:
    """All region x side combinations, region-assignment major."""
    if problem.n > MAX_OBJECTS or len(problem.regions) > MAX_REGIONS:
        raise ValueError(f"repair supports at most {MAX_OBJECTS} objects and {MAX_REGIONS} regions")
    n_pairs = len(problem.pairs)
    side_combos = list(itertools.product(range(4), repeat=n_pairs))
    return [Assignment(regs, tuple(SIDES[s] for s in sides))
            for regs in itertools.product(range(len(problem.regions)), repeat=problem.n)
            for sides in side_combos]


def _forests(n, edges):
    """Edge subsets (as index tuples) without cycles."""
    for r in range(len(edges) + 1):
        for subset in itertools.combinations(range(len(edges)), r):
            parent = list(range(n))

            def find(a):
                while parent[a] != a:
                    parent[a] = parent[parent[a]]
                    a = parent[a]
                return a

            ok = True
            for e in subset:
                i, j, _ = edges[e]
                ri, rj = find(i), find(j)
                if ri == rj:
                    ok = False
                    break
                parent[ri] = rj
            if ok:
                yield subset


def solve_axis(target, lower, upper, edges):
    """Exact solution of a 1-D projection with difference constraints.

    ``edges`` holds ``(i, j, d)`` meaning ``x[j] - x[i] >= d``.  Returns
    ``(x, cost)`` or ``None`` when infeasible.

    The optimum is unique.  Its KKT multipliers can be chosen supported on a
    forest of active difference constraints, so it equals the minimiser of
    the problem where those edges hold with equality.  That problem reduces
    to one clipped mean per connected block, so enumerating forests and
    keeping the cheapest feasible candidate recovers the optimum exactly.
    """
    target = [float(v) for v in target]
    lower = [float(v) for v in lower]
    upper = [float(v) for v in upper]
    edges = [(int(i), int(j), float(d)) for i, j, d in edges]
    n = len(target)
    best = None
    for subset in _forests(n, edges):
        adj = [[] for _ in range(n)]
        for e in subset:
            i, j, d = edges[e]
            adj[i].append((j, d))
            adj[j].append((i, -d))
        offset = [None] * n
        x = [0.0] * n
        feasible = True
        for root in range(n):
            if offset[root] is not None:
                continue
            offset[root] = 0.0
            block, stack = [root], [root]
            while stack:
                a = stack.pop()
                for b, d in adj[a]:
                    if offset[b] is None:
                        offset[b] = offset[a] + d
                        block.append(b)
                        stack.append(b)
            lo = max(lower[b] - offset[b] for b in block)
            hi = min(upper[b] - offset[b] for b in block)
            if lo > hi + TOL:
                feasible = False
                break
            t = sum(target[b] - offset[b] for b in block) / len(block)
            t = min(max(t, lo), hi)
            for b in block:
                x[b] = t + offset[b]
        if not feasible:
            continue
        if any(x[j] - x[i] < d - TOL for i, j, d in edges):
            continue
        if any(x[i] < lower[i] - TOL or x[i] > upper[i] + TOL for i in range(n)):
            continue
        cost = sum((a - b) ** 2 for a, b in zip(x, target))
        if best is None or cost < best[1]:
            best = (x, cost)
    if best is None:
        return None
    return np.array(best[0]), best[1]


def _axis_edges(problem: RepairProblem, sides):
    ex, ey = [], []
    a = problem.half_sides
    for (i, j), side in zip(problem.pairs, sides):
        d = a[i] + a[j]
        if side == "left":       # i left of j
            ex.append((i, j, d))
        elif side == "right":
            ex.append((j, i, d))
        elif side == "down":     # i below j
            ey.append((i, j, d))
        else:
            ey.append((j, i, d))
    return tuple(ex), tuple(ey)


class _Solver:
    """Memoises axis sub-problems across assignments of one problem.

    Sub-problems are keyed by their bounds, so region assignments that share
    a coordinate range share the work.
    """

    def __init__(self, problem: RepairProblem):
        self.p = problem
        self.cache = {}

    def axis(self, axis, regs, edges):
        R = [self.p.regions[r] for r in regs]
        if axis == 0:
            lo = tuple(r.x_min for r in R)
            hi = tuple(r.x_max for r in R)
        else:
            lo = tuple(r.y_min for r in R)
            hi = tuple(r.y_max for r in R)
        key = (axis, lo, hi, edges)
        if key not in self.cache:
            self.cache[key] = solve_axis(self.p.positions[:, axis], lo, hi, list(edges))
        return self.cache[key]

    def solve(self, a: Assignment, bound: float = np.inf):
        """Positions and cost, or ``None`` if infeasible or costlier than ``bound``."""
        ex, ey = _axis_edges(self.p, a.sides)
        sx = self.axis(0, a.regions, ex)
        if sx is None or sx[1] > bound:
            return None
        sy = self.axis(1, a.regions, ey)
        if sy is None:
            return None
        return np.stack([sx[0], sy[0]], axis=1), sx[1] + sy[1]


def solve_fixed(problem: RepairProblem, assignment: Assignment):
    """Exact QP with binaries fixed.  Returns ``(positions, cost)`` or ``None``."""
    return _Solver(problem).solve(assignment)


def satisfies(problem: RepairProblem, positions, assignment: Assignment, tol: float = TOL) -> bool:
    pos = np.asarray(positions, dtype=np.float64)
    for i, r in enumerate(assignment.regions):
        if not problem.regions[r].contains(pos[i], tol):
            return False
    ex, ey = _axis_edges(problem, assignment.sides)
    return (all(pos[j, 0] - pos[i, 0] >= d - tol for i, j, d in ex)
            and all(pos[j, 1] - pos[i, 1] >= d - tol for i, j, d in ey))


def is_valid(problem: RepairProblem, positions, tol: float = TOL) -> bool:
    """Every centre in some region and every pair separated on some side."""
    pos = np.asarray(positions, dtype=np.float64)
    for p in pos:
        if not any(r.contains(p, tol) for r in problem.regions):
            return False
    a = problem.half_sides
    for i, j in problem.pairs:
        d = a[i] + a[j]
        gap = max(pos[j, 0] - pos[i, 0], pos[i, 0] - pos[j, 0],
                  pos[j, 1] - pos[i, 1], pos[i, 1] - pos[j, 1])
        if gap < d - tol:
            return False
    return True


def repair(problem: RepairProblem) -> RepairResult:
    """Minimum squared-edit valid placement; ties go to the first assignment."""
    assignments = enumerate_assignments(problem)
    orig = problem.positions
    if is_valid(problem, orig):
        first = next((a for a in assignments if satisfies(problem, orig, a)), None)
        return RepairResult(orig.copy(), 0.0, 0.0, first)

    solver = _Solver(problem)
    n_side = 4 ** len(problem.pairs)
    # Box projection ignores separation, so it bounds each region block from
    # below.  Visiting blocks cheapest bound first lets the bound prune early;
    # ties are broken by enumeration order so the result does not depend on
    # the visiting order.
    blocks = []
    for start in range(0, len(assignments), n_side):
        regs = assignments[start].regions
        bound = sum(float(np.sum((problem.regions[r].project(p) - p) ** 2))
                    for p, r in zip(orig, regs))
        blocks.append((bound, start))
    blocks.sort()
    best = None
    for bound, start in blocks:
        if best is not None and bound > best[1]:
            break
        for k in range(start, start + n_side):
            a = assignments[k]
            out = solver.solve(a, np.inf if best is None else best[1])
            if out is None:
                continue
            if best is None or out[1] < best[1] or (out[1] == best[1] and k < best[3]):
                best = (out[0], out[1], a, k)
    if best is None:
        raise ValueError("no feasible placement exists")
    pos, cost, a, _ = best
    disp = float(np.sum(np.linalg.norm(pos - orig, axis=1)))
    return RepairResult(pos, float(np.sum((pos - orig) ** 2)), disp, a)


def repair_teleop(theta, workspace: Region, noise_cap: float, n_goals: int = 2):
    """Clamp goal coordinates into the workspace and noise terms into [0, cap].

    Returns ``(theta_repaired, displacement)`` where displacement sums the
    Euclidean goal moves and the absolute noise changes.
    """
    theta = np.asarray(theta, dtype=np.float64)
    out = theta.copy()
    goals = out[:2 * n_goals].reshape(n_goals, 2)
    goals[:, 0] = np.clip(goals[:, 0], workspace.x_min, workspace.x_max)
    goals[:, 1] = np.clip(goals[:, 1], workspace.y_min, workspace.y_max)
    out[2 * n_goals:] = np.clip(out[2 * n_goals:], 0.0, noise_cap)
    moved = np.linalg.norm(goals - theta[:2 * n_goals].reshape(n_goals, 2), axis=1).sum()
    moved += np.abs(out[2 * n_goals:] - theta[2 * n_goals:]).sum()
    return out, float(moved)


def regularize(f_raw: float, displacement: float, weight: float = 100.0) -> float:
    """Objective used by the training archive: raw minus weighted repair distance."""
    if weight < 0:
        raise ValueError("regularization weight must be nonnegative")
    return f_raw - weight * displacement
