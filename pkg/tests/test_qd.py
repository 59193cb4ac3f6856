import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sasgen.qd import (CMAES, Archive, ArchiveSpec, CmaMaeEmitter, CmaMaegaEmitter, PRESETS,
                       add_cma_mae, add_map_elites, cell_coords, cell_index,
                       emitter_cma_mae_step, emitter_cma_maega_step, map_elites_ask, qd_score,
                       random_search_ask)

SQUARE = ArchiveSpec((-1.0, -1.0), (1.0, 1.0), (20, 20))
finite = st.floats(-2.0, 2.0, allow_nan=False)


def test_cell_index_examples():
    spec = PRESETS["teleop"]
    assert cell_coords(spec, [0.0, 0.0]) == (0, 0)
    assert cell_coords(spec, [0.16, 0.0])[0] == 12
    assert cell_coords(spec, [0.40, 0.0])[0] == 24
    assert cell_coords(spec, [-1.0, 1.0]) == (0, 99)
    assert cell_index(spec, [0.40, 0.112]) == spec.n_cells - 1
    with pytest.raises(ValueError):
        cell_index(spec, [np.nan, 0.0])
    with pytest.raises(ValueError):
        cell_index(spec, [0.1])


def test_presets():
    assert PRESETS["teleop"].bins == (25, 100)
    assert PRESETS["collab-I"].bins == (27, 65)
    assert PRESETS["collab-I"].lows == (0.05, 0.35)
    assert PRESETS["collab-II"].bins == (20, 50)
    with pytest.raises(ValueError):
        ArchiveSpec((1.0,), (0.0,), (3,))


def test_map_elites_rules():
    a = Archive(SQUARE)
    assert add_map_elites(a, [0.0], 5.0, [0.1, 0.1]) == "inserted"
    assert add_map_elites(a, [1.0], 4.0, [0.1, 0.1]) == "rejected"
    assert add_map_elites(a, [2.0], 5.0, [0.1, 0.1]) == "rejected"
    assert add_map_elites(a, [3.0], 6.0, [0.1, 0.1]) == "replaced"
    assert a.cells[cell_index(SQUARE, [0.1, 0.1])].theta.tolist() == [3.0]


def test_cma_mae_rule_examples():
    a = Archive(SQUARE, soft=True, alpha=0.1, min_f=0.0)
    idx = cell_index(SQUARE, [0.0, 0.0])
    assert add_cma_mae(a, [0.0], 10.0, [0.0, 0.0]) == 10.0
    assert a.thresholds[idx] == pytest.approx(1.0)
    a.thresholds[idx] = 2.0
    final = Archive(SQUARE)
    assert add_cma_mae(a, [1.0], 1.0, [0.0, 0.0], final=final) == -1.0
    assert a.thresholds[idx] == 2.0
    assert a.cells[idx].f == 10.0
    # The companion archive takes the offer whatever the soft decision.
    assert final.cells[idx].f == 1.0
    with pytest.raises(ValueError):
        add_cma_mae(Archive(SQUARE), [0.0], 1.0, [0.0, 0.0])
    with pytest.raises(ValueError):
        add_cma_mae(a, [0.0], 1.0, [0.0, 0.0], alpha=1.5)


def test_qd_score_examples():
    a = Archive(SQUARE)
    assert qd_score(a) == 0.0
    add_map_elites(a, [0.0], 5.0, [0.5, 0.5])
    add_map_elites(a, [0.0], 3.0, [-0.5, 0.5])
    assert qd_score(a) == 8.0


offers = st.lists(st.tuples(finite, finite, st.floats(0.0, 10.0)), min_size=1, max_size=60)


@settings(max_examples=60, deadline=None)
@given(offers)
def test_qd_score_nondecreasing_and_self_consistent(stream):
    a = Archive(SQUARE)
    last = 0.0
    for x, y, f in stream:
        add_map_elites(a, [x, y], f, [x, y])
        score = qd_score(a)
        assert score >= last
        last = score
    for idx, e in a.elites():
        assert cell_index(SQUARE, e.m) == idx


@settings(max_examples=60, deadline=None)
@given(offers)
def test_alpha_one_matches_map_elites(stream):
    soft, final, flat = Archive(SQUARE, soft=True, alpha=1.0), Archive(SQUARE), Archive(SQUARE)
    for k, (x, y, f) in enumerate(stream):
        add_cma_mae(soft, [k], f, [x, y], final=final)
        add_map_elites(flat, [k], f, [x, y])
    assert final.cells.keys() == flat.cells.keys()
    for idx in flat.cells:
        assert final.cells[idx].f == flat.cells[idx].f
        assert np.array_equal(final.cells[idx].theta, flat.cells[idx].theta)


@settings(max_examples=60, deadline=None)
@given(offers, st.floats(0.0, 1.0))
def test_soft_thresholds_nondecreasing(stream, alpha):
    a = Archive(SQUARE, soft=True, alpha=alpha, min_f=0.0)
    prev = a.thresholds.copy()
    for x, y, f in stream:
        add_cma_mae(a, [x, y], f, [x, y])
        assert np.all(a.thresholds >= prev) and np.all(a.thresholds >= 0.0)
        prev = a.thresholds.copy()


def test_cma_ask_shapes_and_limits():
    rng = np.random.default_rng(0)
    es = CMAES(np.array([1.0, 2.0, 3.0]), 1e-12)
    x = es.ask(rng)
    assert x.shape == (36, 3)
    assert np.allclose(x, [1.0, 2.0, 3.0], atol=1e-9)
    es = CMAES(np.zeros(4), 0.7)
    draws = es.ask(rng, popsize=10_000)
    se = 0.7 / np.sqrt(10_000)
    assert np.all(np.abs(draws.mean(axis=0)) < 3 * se)


def test_cma_tell_counts_generations():
    rng = np.random.default_rng(0)
    es = CMAES(np.zeros(3), 0.5, popsize=8)
    es.tell(es.ask(rng))
    assert es.generation == 1


@pytest.mark.parametrize("seed", range(3))
def test_cma_sphere(seed):
    rng = np.random.default_rng(seed)
    es = CMAES(rng.uniform(-3, 3, 9), 1.0, popsize=36)
    best, evals = -np.inf, 0
    while evals < 20_000 and best <= -1e-6:
        x = es.ask(rng)
        f = -np.sum(x ** 2, axis=1)
        evals += len(x)
        best = max(best, f.max())
        es.tell(x[np.argsort(-f, kind="stable")])
    assert best > -1e-6


def test_cma_equal_ranks_unbiased():
    shifts = []
    for seed in range(200):
        rng = np.random.default_rng(seed)
        es = CMAES(np.zeros(2), 1.0, popsize=10)
        es.tell(es.ask(rng))
        shifts.append(es.mean.copy())
    shifts = np.array(shifts)
    se = shifts.std(axis=0) / np.sqrt(len(shifts))
    assert np.all(np.abs(shifts.mean(axis=0)) < 3 * se)


def test_cma_stops_on_degenerate_spread():
    es = CMAES(np.zeros(2), 1e-13)
    assert es.should_stop()
    es = CMAES(np.array([np.nan, 0.0]), 1.0)
    assert es.should_stop()


def test_random_search_ask():
    rng = np.random.default_rng(0)
    lows, highs = np.array([0.0, -1.0]), np.array([1.0, 3.0])
    assert len(random_search_ask((lows, highs), 0, rng)) == 0
    x = random_search_ask((lows, highs), 10_000, rng)
    assert np.all((x >= lows) & (x <= highs))
    se = (highs - lows) / np.sqrt(12) / np.sqrt(len(x))
    assert np.all(np.abs(x.mean(axis=0) - (lows + highs) / 2) < 3 * se)


def test_map_elites_ask():
    rng = np.random.default_rng(0)
    bounds = (np.zeros(3), np.ones(3))
    empty = map_elites_ask(Archive(SQUARE), 0.1, 5, rng, bounds)
    assert empty.shape == (5, 3) and np.all((empty >= 0) & (empty <= 1))
    a = Archive(SQUARE)
    add_map_elites(a, [0.2, 0.3, 0.4], 1.0, [0.0, 0.0])
    add_map_elites(a, [0.5, 0.6, 0.7], 1.0, [0.5, 0.5])
    x = map_elites_ask(a, 0.0, 20, rng, bounds)
    parents = {tuple(e.theta) for _, e in a.elites()}
    assert all(tuple(row) in parents for row in x)
    y = map_elites_ask(a, [0.0, 0.0, 0.1], 2000, rng, bounds)
    assert np.all(np.isin(y[:, 0], [0.2, 0.5]))
    assert abs(np.std(y[:, 2] - np.where(y[:, 0] == 0.2, 0.4, 0.7)) - 0.1) < 0.01


def quadratic(thetas):
    thetas = np.atleast_2d(thetas)
    return [(100.0 - float(np.sum(t ** 2)), t[:2].copy(), None) for t in thetas]


@pytest.mark.parametrize("seed", range(3))
def test_cma_mae_emitter_beats_random(seed):
    budget, n = 3600, 6
    rng = np.random.default_rng(seed)
    soft, final = Archive(SQUARE, soft=True, alpha=0.1), Archive(SQUARE)
    emitter = CmaMaeEmitter(np.zeros(n), 0.5, batch=36)
    for _ in range(budget // 36):
        emitter_cma_mae_step(soft, emitter, quadratic, rng, final=final)
    rand = Archive(SQUARE)
    for f, m, _ in quadratic(random_search_ask((np.full(n, -5.0), np.full(n, 5.0)), budget, rng)):
        add_map_elites(rand, [0.0], f, m)
    assert len(final) > len(rand)


def test_cma_mae_emitter_restarts_without_progress():
    rng = np.random.default_rng(0)
    soft = Archive(SQUARE, soft=True, alpha=0.1, min_f=1e9)
    emitter = CmaMaeEmitter(np.zeros(3), 0.5, batch=8)
    emitter_cma_mae_step(soft, emitter, quadratic, rng)
    assert emitter.restarts == 1
    assert emitter.opt.sigma == 0.5 and emitter.opt.generation == 0


def test_maega_zero_gradients_keep_theta():
    rng = np.random.default_rng(0)
    theta0 = np.array([0.3, -0.2, 0.1])
    em = CmaMaegaEmitter(theta0, 1.0, n_measures=2, batch=8)
    archive = Archive(SQUARE, soft=True, alpha=0.1, min_f=-1.0)
    seen = []

    def predict(branches):
        seen.append(branches.copy())
        return np.zeros(len(branches)), np.tile(theta0[:2], (len(branches), 1))

    emitter_cma_maega_step(archive, em, lambda t: (0.0, t[:2], np.zeros((3, 3))), predict, rng)
    assert np.allclose(seen[0], theta0)
    assert np.allclose(em.theta, theta0)


def test_maega_deterministic_limit():
    rng = np.random.default_rng(0)
    theta0 = np.array([0.1, 0.2])
    em = CmaMaegaEmitter(theta0, 1e-12, n_measures=0, batch=4, coef_mean=[1.0])
    archive = Archive(ArchiveSpec((-10.0,), (10.0,), (5,)), soft=True)
    seen = []

    def predict(b):
        seen.append(b.copy())
        return np.full(len(b), 1.0), b[:, :1]

    emitter_cma_maega_step(archive, em, lambda t: (1.0, t[:1], np.array([[3.0, 0.0]])), predict, rng)
    assert np.allclose(seen[0], theta0 + [1.0, 0.0])


def test_maega_nan_gradient_restarts():
    rng = np.random.default_rng(0)
    em = CmaMaegaEmitter(np.zeros(2), 1.0, batch=4)
    archive = Archive(SQUARE, soft=True)
    n = emitter_cma_maega_step(archive, em, lambda t: (1.0, t, np.full((3, 2), np.nan)),
                               lambda b: (np.ones(len(b)), b), rng)
    assert n == 0 and em.restarts == 1


def test_maega_fills_linear_benchmark():
    # Linear objective and measures: every cell of the archive is reachable.
    n = 10
    rng = np.random.default_rng(0)
    c = rng.standard_normal(n)
    A = np.zeros((2, n))
    A[0, 0] = A[1, 1] = 1.0

    def grad_fn(t):
        return 50.0 + c @ t, A @ t, np.vstack([c, A])

    def predict(b):
        return 50.0 + b @ c, b @ A.T

    archive = Archive(SQUARE, soft=True, alpha=0.1)
    em = CmaMaegaEmitter(np.zeros(n), 0.1, n_measures=2, batch=36)
    evals = 0
    while evals + 37 <= 10_000:
        emitter_cma_maega_step(archive, em, grad_fn, predict, rng)
        evals += 37
    assert len(archive) >= 0.95 * SQUARE.n_cells


def test_emitter_streams_reproducible():
    def run(seed):
        rng = np.random.default_rng(seed)
        soft = Archive(SQUARE, soft=True)
        em = CmaMaeEmitter(np.zeros(4), 0.5, batch=12)
        out = []
        for _ in range(5):
            sols = em.ask(rng).copy()
            out.append(sols)
            deltas = [add_cma_mae(soft, t, f, m) for t, (f, m, _) in zip(sols, quadratic(sols))]
            em.tell(soft, sols, deltas, rng)
        return np.array(out)
    assert np.array_equal(run(3), run(3))


def test_alpha_one_from_infinite_threshold():
    spec = PRESETS["teleop"]
    soft = Archive(spec, soft=True, alpha=1.0, min_f=-np.inf)
    add_cma_mae(soft, np.zeros(2), -3.0, [0.1, 0.05])
    idx = cell_index(spec, [0.1, 0.05])
    assert soft.thresholds[idx] == -3.0
    assert add_cma_mae(soft, np.zeros(2), -4.0, [0.1, 0.05]) == -1.0
