import numpy as np
import pytest

from sasgen.domains import DOMAINS, HUMAN_BETA_RANGE, V_MULT_RANGE, make_domain
from sasgen.repair import RepairProblem, is_valid


@pytest.mark.parametrize("name", DOMAINS)
def test_samples_are_valid_and_unchanged_by_repair(name):
    d = make_domain(name)
    rng = np.random.default_rng(0)
    for _ in range(5):
        theta = d.sample(rng)
        assert theta.shape == (d.dim,)
        fixed, disp = d.repair(theta)
        assert disp == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(fixed, theta, atol=1e-12)


def test_dimensions_and_archives():
    assert make_domain("teleop").dim == 9
    assert make_domain("collab-I").dim == 6
    assert make_domain("collab-I-human-search").dim == 8
    assert make_domain("collab-II").archive.bins == (20, 50)
    assert make_domain("collab-II").measure_idx == (2, 3)
    assert make_domain("teleop-blend").cap == 20.0
    with pytest.raises(ValueError):
        make_domain("kitchen")


def test_me_sigma_per_parameter():
    d = make_domain("teleop")
    np.testing.assert_array_equal(d.sigma_me, [0.01] * 4 + [0.005] * 5)
    assert np.all(make_domain("collab-I").sigma_me == 0.1)


def test_search_scale_equalises_ranges():
    d = make_domain("teleop")
    span = (d.highs - d.lows) / d.search_scale
    np.testing.assert_allclose(span, span[0])


def test_collab_repair_separates_goals():
    d = make_domain("collab-I")
    theta = np.array([0.2, 0.5, 0.21, 0.5, -0.3, 0.45])
    fixed, disp = d.repair(theta)
    assert disp > 0
    cfg = d.collab
    assert is_valid(RepairProblem(list(cfg.regions), fixed.reshape(3, 2), cfg.half_side),
                    fixed.reshape(3, 2), tol=1e-9)


def test_human_search_parameters_clamped_and_used():
    d = make_domain("collab-I-human-search")
    theta = np.r_[d.sample(np.random.default_rng(1))[:6], 9.0, 0.1]
    fixed, _ = d.repair(theta)
    assert fixed[6] == HUMAN_BETA_RANGE[1] and fixed[7] == V_MULT_RANGE[0]
    slow = d.evaluate(np.r_[theta[:6], 5.0, 0.8], seed=3)
    fast = d.evaluate(np.r_[theta[:6], 5.0, 1.5], seed=3)
    assert fast.f <= slow.f


def test_regularizer_scales_with_weight():
    d = make_domain("teleop")
    theta = d.sample(np.random.default_rng(2))
    theta[0] = d.highs[0] + 0.05
    assert d.regularizer(theta, 0.0) == 0.0
    assert d.regularizer(theta, 100.0) == pytest.approx(100 * d.regularizer(theta, 1.0))
    assert d.regularizer(theta, 1.0) > 0


def test_evaluation_packaging():
    d = make_domain("collab-I")
    ev = d.evaluate(d.sample(np.random.default_rng(5)), seed=0)
    assert ev.grids.shape == (2, 32, 32)
    assert ev.m.shape == (2,)
    assert 0 < ev.f <= 100
