"""Outer/inner loop orchestration for surrogate-assisted search and the baselines."""
from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, validate
from .qd.archive import Archive, add_cma_mae, add_map_elites, cell_index, qd_score
from .qd.emitters import (CmaMaeEmitter, CmaMaegaEmitter, emitter_cma_mae_step,
                          emitter_cma_maega_step, map_elites_ask, random_search_ask)
from .repair import regularize
from .surrogate import Sample, SurrogateModel

WORKERS_ENV = "SASGEN_WORKERS"


@dataclass
class OuterLoopState:
    config: ExperimentConfig
    domain: object
    final: Archive                  # raw objectives, elitist
    training: Archive               # regularized objectives, drives the search
    rng: np.random.Generator
    dataset: list = field(default_factory=list)
    model: SurrogateModel | None = None
    evals: int = 0
    failures: int = 0
    metrics: list = field(default_factory=list)
    losses: list = field(default_factory=list)      # (occupancy, downstream) per training call
    surrogate_sizes: list = field(default_factory=list)
    repairs: list = field(default_factory=list)     # one record per evaluation
    started: float = field(default_factory=time.perf_counter)
    pool: object = None

    @property
    def remaining(self) -> int:
        return self.config.budget - self.evals


@dataclass
class RunResult:
    config: ExperimentConfig
    final: Archive
    training: Archive
    dataset: list
    metrics: list
    model: SurrogateModel | None
    evals: int
    failures: int
    losses: list
    surrogate_sizes: list
    repairs: list = field(default_factory=list)
    artifacts: list = field(default_factory=list)

    @property
    def qd_score(self) -> float:
        return qd_score(self.final)


def eval_seed(master: int, index: int) -> int:
    """Simulation seed of the ``index``-th evaluation of a run."""
    return int(np.random.SeedSequence([master, index]).generate_state(1)[0])


# -- evaluation dispatch ------------------------------------------------------
_WORKER_DOMAIN = None


def _init_worker(domain):
    global _WORKER_DOMAIN
    _WORKER_DOMAIN = domain


def _evaluate_one(args):
    domain, theta, seed = args
    domain = domain if domain is not None else _WORKER_DOMAIN
    try:
        return domain.evaluate(theta, seed)
    except (ValueError, ArithmeticError, RuntimeError, IndexError):
        return None


def _evaluate_many(state: OuterLoopState, thetas, seeds):
    if state.pool is None:
        return [_evaluate_one((state.domain, t, s)) for t, s in zip(thetas, seeds)]
    return list(state.pool.map(_evaluate_one, [(None, t, s) for t, s in zip(thetas, seeds)]))


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


# -- phases -------------------------------------------------------------------
def label_batch(state: OuterLoopState, thetas) -> np.ndarray:
    """Repair, simulate and archive a batch; returns training-archive improvements.

    The batch is truncated to the remaining budget.  Failed simulations use
    up budget, are left out of the dataset and get an improvement of -inf.
    """
    thetas = np.asarray(thetas, dtype=np.float64)
    thetas = thetas[:max(state.remaining, 0)]
    seeds = [eval_seed(state.config.seed, state.evals + i) for i in range(len(thetas))]
    results = _evaluate_many(state, thetas, seeds)
    deltas = np.full(len(thetas), -np.inf)
    w = state.config.reg_weight
    for i, (theta, ev) in enumerate(zip(thetas, results)):
        index = state.evals
        state.evals += 1
        if ev is None:
            state.failures += 1
            state.repairs.append({"eval": index, "failed": True})
            continue
        state.repairs.append({"eval": index, **ev.repair})
        meta = {"eval": index, "seed": seeds[i]}
        add_map_elites(state.final, ev.theta, ev.f, ev.m, meta)
        f_reg = regularize(ev.f, ev.displacement, w)
        if state.training.soft:
            deltas[i] = add_cma_mae(state.training, theta, f_reg, ev.m, meta=meta)
        else:
            cur = state.training.cells.get(cell_index(state.training.spec, ev.m))
            deltas[i] = f_reg - (cur.f if cur is not None else -np.inf)
            add_map_elites(state.training, theta, f_reg, ev.m, meta)
        state.dataset.append(Sample(ev.theta, ev.f, ev.m, ev.grids))
    state.metrics.append({"evals": state.evals,
                          "wall_clock": time.perf_counter() - state.started,
                          "qd_score": qd_score(state.final),
                          "cells": len(state.final)})
    return deltas


def inner_loop_exploit(state: OuterLoopState, x0) -> Archive:
    """Search the surrogate for N_exploit iterations into a fresh soft archive.

    The emitters run on ``theta / domain.search_scale``; elites are mapped back
    to parameter units before returning.
    """
    cfg, domain, model = state.config, state.domain, state.model
    archive = Archive(domain.archive, soft=True, alpha=cfg.alpha, min_f=cfg.min_f)
    sigma0 = domain.sigma0 if cfg.sigma0 is None else cfg.sigma0
    s = domain.search_scale

    def reg(theta):
        return domain.regularizer(theta, cfg.reg_weight)

    def predict_fn(vs):
        thetas = np.asarray(vs) * s
        f, m = model.predict(thetas)
        return f - np.array([reg(t) for t in thetas]), m

    if cfg.algorithm == "dsas":
        emitter = CmaMaegaEmitter(x0 / s, sigma0, n_measures=len(domain.measure_idx), batch=cfg.batch)

        def grad_fn(v):
            theta = v * s
            f, m, J = model.predict_with_grads(theta)
            # The penalty is piecewise smooth; only its value is applied.
            return f - reg(theta), m, J * s

        for _ in range(cfg.n_exploit):
            emitter_cma_maega_step(archive, emitter, grad_fn, predict_fn, state.rng)
    else:
        emitter = CmaMaeEmitter(x0 / s, sigma0, batch=cfg.batch)

        def evaluate(vs):
            f, m = predict_fn(vs)
            return [(f[i], m[i], None) if np.isfinite(f[i]) and np.all(np.isfinite(m[i])) else None
                    for i in range(len(vs))]

        for _ in range(cfg.n_exploit):
            emitter_cma_mae_step(archive, emitter, evaluate, state.rng)
    for _, e in archive.elites():
        e.theta = np.asarray(e.theta) * s
    return archive


def select_solutions(archive: Archive, k_sel: int, rng) -> np.ndarray:
    """Uniform choice without replacement of up to ``k_sel`` elites."""
    picked = archive.sample_elites(rng, k_sel, replace=False)
    if not picked:
        return np.zeros((0, 0))
    return np.array([e.theta for e in picked])


def train_models(model: SurrogateModel, dataset, config: ExperimentConfig):
    if not dataset:
        raise ValueError("cannot train on an empty dataset")
    return model.train(dataset, config.epochs, config.train_batch)


# -- drivers ------------------------------------------------------------------
def _new_state(cfg: ExperimentConfig) -> OuterLoopState:
    domain = cfg.make_domain()
    rng = np.random.default_rng(cfg.seed)
    soft = cfg.algorithm == "cma-mae"
    return OuterLoopState(cfg, domain, Archive(domain.archive),
                          Archive(domain.archive, soft=soft, alpha=cfg.alpha, min_f=cfg.min_f), rng)


def run_surrogate(state: OuterLoopState, out_dir: Path | None = None, artifacts=None):
    cfg, domain = state.config, state.domain
    state.model = SurrogateModel(domain.lows, domain.highs, domain.channels,
                                 n_measures=len(domain.measure_idx), occ_widths=cfg.occ_widths,
                                 down_widths=cfg.down_widths, seed=cfg.seed, lr=cfg.lr)
    x0 = domain.sample(state.rng)
    it = 0
    while state.remaining > 0:
        surrogate = inner_loop_exploit(state, x0)
        state.surrogate_sizes.append(len(surrogate))
        thetas = select_solutions(surrogate, cfg.k_sel, state.rng)
        if len(thetas) == 0:
            thetas = random_search_ask((domain.lows, domain.highs), cfg.k_sel, state.rng,
                                       sampler=domain.sample)
        label_batch(state, thetas)
        if state.dataset:
            state.losses.append(train_models(state.model, state.dataset, cfg))
        if out_dir is not None and cfg.checkpoints:
            _checkpoint(state, out_dir, it, artifacts)
        it += 1


def _checkpoint(state, out_dir: Path, it: int, artifacts):
    from .io import write_archive_csv
    ck = out_dir / "checkpoints"
    ck.mkdir(parents=True, exist_ok=True)
    paths = [ck / f"model_{it:04d}.npz", ck / f"archive_{it:04d}.csv"]
    state.model.save(paths[0])
    write_archive_csv(state.final, paths[1])
    if artifacts is not None:
        artifacts.extend(str(p.relative_to(out_dir)) for p in paths)


def run_baseline(state: OuterLoopState):
    cfg, domain, rng = state.config, state.domain, state.rng
    bounds = (domain.lows, domain.highs)
    if cfg.algorithm == "random":
        while state.remaining > 0:
            label_batch(state, random_search_ask(bounds, min(cfg.batch, state.remaining), rng,
                                                 sampler=domain.sample))
    elif cfg.algorithm == "map-elites":
        sigma = domain.sigma_me if cfg.sigma_me is None else cfg.sigma_me
        while state.remaining > 0:
            n = min(cfg.batch, state.remaining)
            label_batch(state, map_elites_ask(state.training, sigma, n, rng, bounds,
                                              sampler=domain.sample))
    elif cfg.algorithm == "cma-mae":
        sigma0 = domain.sigma0 if cfg.sigma0 is None else cfg.sigma0
        emitter = CmaMaeEmitter(domain.sample(rng), sigma0, batch=cfg.batch)
        while state.remaining > 0:
            sols = emitter.ask(rng)
            if len(sols) > state.remaining:
                label_batch(state, sols)      # truncated final batch, no update needed
                break
            deltas = label_batch(state, sols)
            emitter.tell(state.training, sols, deltas, rng)
    else:
        raise ValueError(f"{cfg.algorithm!r} is not a baseline")


def run_experiment(config: ExperimentConfig, out_dir=None) -> RunResult:
    """Run one configured experiment.  ``out_dir`` receives model checkpoints."""
    validate(config)
    state = _new_state(config)
    artifacts = []
    out = Path(out_dir) if out_dir is not None else None
    workers = worker_count()
    pool = None
    if workers > 1:
        pool = ProcessPoolExecutor(workers, initializer=_init_worker, initargs=(state.domain,))
        state.pool = pool
    try:
        if config.algorithm in ("dsas", "sas"):
            run_surrogate(state, out, artifacts)
        else:
            run_baseline(state)
    finally:
        if pool is not None:
            pool.shutdown()
        state.pool = None
    return RunResult(config, state.final, state.training, state.dataset, state.metrics,
                     state.model, state.evals, state.failures, state.losses,
                     state.surrogate_sizes, state.repairs, artifacts)
