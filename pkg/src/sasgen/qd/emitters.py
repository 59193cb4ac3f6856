"""Candidate generators: random search, MAP-Elites, CMA-MAE and CMA-MAEGA."""
from __future__ import annotations

import numpy as np

from .archive import Archive, add_cma_mae
from .cmaes import CMAES


def random_search_ask(bounds, batch: int, rng, sampler=None) -> np.ndarray:
    """Uniform samples in the box ``bounds = (lows, highs)`` or from ``sampler(rng)``."""
    lows, highs = (np.asarray(b, dtype=np.float64) for b in bounds)
    if batch <= 0:
        return np.zeros((0, lows.size))
    if sampler is not None:
        return np.array([sampler(rng) for _ in range(batch)])
    return rng.uniform(lows, highs, size=(batch, lows.size))


def map_elites_ask(archive: Archive, sigma, batch: int, rng, bounds, sampler=None) -> np.ndarray:
    """Uniformly chosen elites plus elementwise Gaussian noise."""
    if len(archive) == 0:
        return random_search_ask(bounds, batch, rng, sampler)
    parents = np.array([e.theta for e in archive.sample_elites(rng, batch)])
    sigma = np.broadcast_to(np.asarray(sigma, dtype=np.float64), parents.shape[1:])
    return parents + rng.standard_normal(parents.shape) * sigma


class CmaMaeEmitter:
    """CMA-ES in parameter space ranked by soft-archive improvement."""

    def __init__(self, x0, sigma0: float, batch: int = 36):
        self.x0 = np.array(x0, dtype=np.float64)
        self.sigma0 = float(sigma0)
        self.batch = batch
        self.restarts = 0
        self.opt = CMAES(self.x0, self.sigma0, batch)
        self._pending = None

    def ask(self, rng) -> np.ndarray:
        self._pending = self.opt.ask(rng)
        return self._pending

    def tell(self, archive: Archive, solutions, deltas, rng) -> None:
        deltas = np.asarray(deltas, dtype=np.float64)
        order = np.argsort(-deltas, kind="stable")
        self.opt.tell(np.asarray(solutions)[order])
        if not np.any(deltas > 0) or self.opt.should_stop():
            self.restart(archive, rng)

    def restart(self, archive: Archive, rng) -> None:
        picked = archive.sample_elites(rng, 1)
        start = picked[0].theta if picked else self.x0
        self.opt = CMAES(start, self.sigma0, self.batch)
        self.restarts += 1


def emitter_cma_mae_step(archive: Archive, emitter: CmaMaeEmitter, evaluate, rng,
                         final: Archive | None = None) -> int:
    """One ask / evaluate / add / tell round.

    ``evaluate(solutions)`` returns one ``(f, m, meta)`` tuple per row, or
    ``None`` for a failed evaluation (ranked last).  Returns the number of
    solutions accepted by the soft archive.
    """
    sols = emitter.ask(rng)
    results = evaluate(sols)
    deltas = np.full(len(sols), -np.inf)
    for i, res in enumerate(results):
        if res is None:
            continue
        f, m, meta = res
        deltas[i] = add_cma_mae(archive, sols[i], f, m, final=final, meta=meta)
    emitter.tell(archive, sols, deltas, rng)
    return int(np.sum(deltas > 0))


class CmaMaegaEmitter:
    """Gradient arborescence: CMA-ES over gradient coefficients around a point."""

    def __init__(self, theta0, sigma_g: float, n_measures: int = 2, batch: int = 36,
                 coef_mean=None):
        self.theta0 = np.array(theta0, dtype=np.float64)
        self.theta = self.theta0.copy()
        self.sigma_g = float(sigma_g)
        self.k = n_measures
        self.batch = batch
        self.coef_mean = (np.zeros(n_measures + 1) if coef_mean is None
                          else np.array(coef_mean, dtype=np.float64))
        self.restarts = 0
        self.opt = CMAES(self.coef_mean, self.sigma_g, batch)

    def restart(self, archive: Archive, rng) -> None:
        picked = archive.sample_elites(rng, 1)
        self.theta = picked[0].theta.copy() if picked else self.theta0.copy()
        self.opt = CMAES(self.coef_mean, self.sigma_g, self.batch)
        self.restarts += 1


def normalize_rows(J) -> np.ndarray:
    J = np.array(J, dtype=np.float64)
    norms = np.linalg.norm(J, axis=1, keepdims=True)
    return np.divide(J, norms, out=np.zeros_like(J), where=norms > 0)


def emitter_cma_maega_step(archive: Archive, emitter: CmaMaegaEmitter, grad_fn, predict_fn, rng,
                           meta: dict | None = None) -> int:
    """One gradient-arborescence iteration.

    ``grad_fn(theta)`` returns ``(f, m, J)`` with ``J`` the (k+1, n) stack of
    objective and measure gradients.  ``predict_fn(thetas)`` returns
    ``(f, m)`` arrays for a batch.  Returns the number of accepted branches.
    """
    theta = emitter.theta
    f0, m0, J = grad_fn(theta)
    J = np.asarray(J, dtype=np.float64)
    if not np.all(np.isfinite(J)) or not np.isfinite(f0):
        emitter.restart(archive, rng)
        return 0
    add_cma_mae(archive, theta, f0, m0, meta=meta)
    J = normalize_rows(J)
    coefs = emitter.opt.ask(rng)
    coefs[:, 0] = np.abs(coefs[:, 0])
    branches = theta + coefs @ J
    fb, mb = predict_fn(branches)
    deltas = np.full(len(branches), -np.inf)
    for i in range(len(branches)):
        if np.isfinite(fb[i]) and np.all(np.isfinite(mb[i])):
            deltas[i] = add_cma_mae(archive, branches[i], fb[i], mb[i], meta=meta)
    order = np.argsort(-deltas, kind="stable")
    emitter.opt.tell(coefs[order])
    top = order[: emitter.opt.mu]
    emitter.theta = theta + emitter.opt.weights @ (branches[top] - theta)
    if not np.any(deltas > 0) or emitter.opt.should_stop():
        emitter.restart(archive, rng)
    return int(np.sum(deltas > 0))
