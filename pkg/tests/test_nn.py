import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sasgen.nn import (Adam, BatchNorm, ChannelSoftmax, Conv2D, Deconv2D, Dense, Flatten,
                       LeakyReLU, Network, ReLU, Reshape, adam_step, finite_diff_check,
                       load_network, loss_kl, loss_mse, save_network)


def naive_deconv(x, W, b, k, s, p, c_out):
    """Transposed convolution by explicit scatter loops."""
    B, H, Wd, C = x.shape
    ho, wo = (H - 1) * s - 2 * p + k, (Wd - 1) * s - 2 * p + k
    Wr = W.reshape(C, k, k, c_out)
    y = np.zeros((B, ho, wo, c_out))
    for n in range(B):
        for i in range(H):
            for j in range(Wd):
                for ki in range(k):
                    for kj in range(k):
                        oy, ox = i * s - p + ki, j * s - p + kj
                        if 0 <= oy < ho and 0 <= ox < wo:
                            y[n, oy, ox] += x[n, i, j] @ Wr[:, ki, kj]
    return y + b


def naive_conv(x, W, b, k, s, p):
    B, H, Wd, C = x.shape
    xp = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0)))
    ho, wo = (H + 2 * p - k) // s + 1, (Wd + 2 * p - k) // s + 1
    Wr = W.reshape(k, k, C, -1)
    y = np.zeros((B, ho, wo, Wr.shape[-1]))
    for i in range(ho):
        for j in range(wo):
            patch = xp[:, i * s:i * s + k, j * s:j * s + k, :]
            y[:, i, j] = np.einsum("bklc,klco->bo", patch, Wr)
    return y + b


def test_dense_zero_weights_outputs_bias():
    layer = Dense(3, 2)
    layer.params["b"] = np.array([0.5, -1.5])
    net = Network([layer], (3,))
    out = net(np.random.default_rng(0).standard_normal((4, 3)))
    assert np.array_equal(out, np.tile([0.5, -1.5], (4, 1)))


def test_relu_values():
    net = Network([ReLU()], (2,))
    assert net(np.array([[-1.0, 2.5]])).tolist() == [[0.0, 2.5]]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 50.0))
def test_channel_softmax_is_distribution(seed, scale):
    x = np.random.default_rng(seed).standard_normal((2, 32, 32, 2)) * scale
    p = Network([ChannelSoftmax()], (32, 32, 2))(x)
    assert np.all(p > 0)
    assert np.allclose(p.sum(axis=(1, 2)), 1.0, atol=1e-6)


def test_shape_mismatch_names_layer():
    with pytest.raises(ValueError, match="layer 1"):
        Network([Dense(4, 8), Dense(5, 2)], (4,))
    net = Network([Dense(4, 2)], (4,), seed=0)
    with pytest.raises(ValueError, match="layer 0"):
        net.forward(np.zeros((1, 3)))


def test_backward_rejects_foreign_activations():
    a = Network([Dense(2, 2)], (2,), seed=0)
    b = Network([Dense(2, 2)], (2,), seed=1)
    acts = a.forward(np.ones((1, 2)))
    with pytest.raises(ValueError):
        b.backward(acts, np.ones((1, 2)))
    with pytest.raises(ValueError):
        a.backward(acts, np.ones((1, 3)))


def test_dense_input_grad_is_adjoint():
    net = Network([Dense(3, 2)], (3,), seed=3)
    W = net.layers[0].params["W"]
    g = np.array([[0.3, -1.2]])
    _, dx = net.backward(net.forward(np.ones((1, 3))), g)
    assert np.allclose(dx, g @ W.T)


def test_mse_at_target_gives_zero_gradients():
    net = Network([Dense(3, 4), ReLU(), Dense(4, 2)], (3,), seed=0)
    x = np.random.default_rng(1).standard_normal((5, 3))
    acts = net.forward(x)
    loss, g = loss_mse(acts.output, acts.output.copy())
    grads, dx = net.backward(acts, g)
    assert loss == 0.0
    assert all(np.all(gr == 0) for gr in grads) and np.all(dx == 0)


@pytest.mark.parametrize("seed", range(3))
def test_three_layer_network_input_grad(seed):
    net = Network([Dense(5, 7), LeakyReLU(0.1), Dense(7, 6), ReLU(), Dense(6, 3)], (5,), seed=seed)
    x = np.random.default_rng(seed).standard_normal((4, 5))
    assert finite_diff_check(net, x, eps=1e-6, seed=seed) < 1e-4


def test_linear_network_check_is_exact():
    # Central differences are exact for linear maps, so a wide step only cuts rounding.
    net = Network([Dense(4, 3), Dense(3, 2)], (4,), seed=0)
    assert finite_diff_check(net, np.random.default_rng(0).standard_normal((3, 4)), eps=1e-2) < 1e-10


def test_kink_coordinates_are_skipped():
    # All-zero weights put every ReLU input exactly on the kink.
    net = Network([Dense(3, 3), ReLU(), Dense(3, 1)], (3,), seed=0)
    net.layers[0].params["W"][:] = 0.0
    net.layers[0].params["b"][:] = 0.0
    # One-sided slopes would give relative errors of order one here.
    assert finite_diff_check(net, np.ones((2, 3)), n_coords=64) < 1e-8


def test_finite_diff_check_rejects_bad_eps():
    net = Network([Dense(2, 1)], (2,), seed=0)
    with pytest.raises(ValueError):
        finite_diff_check(net, np.ones((1, 2)), eps=0.1)


def test_conv_matches_loop_oracle():
    rng = np.random.default_rng(0)
    layer = Conv2D(3, 4, 3, 2, 1)
    net = Network([layer], (9, 9, 3), seed=0)
    layer.params["b"] = rng.standard_normal(4)
    x = rng.standard_normal((2, 9, 9, 3))
    assert np.allclose(net(x), naive_conv(x, layer.params["W"], layer.params["b"], 3, 2, 1))


@pytest.mark.parametrize("k,s,p", [(4, 2, 1), (3, 1, 0), (3, 2, 1), (2, 2, 0)])
def test_deconv_matches_loop_oracle(k, s, p):
    rng = np.random.default_rng(k + s + p)
    layer = Deconv2D(3, 2, k, s, p)
    net = Network([layer], (4, 5, 3), seed=1)
    layer.params["b"] = rng.standard_normal(2)
    x = rng.standard_normal((2, 4, 5, 3))
    ref = naive_deconv(x, layer.params["W"], layer.params["b"], k, s, p, 2)
    assert net(x).shape == ref.shape
    assert np.allclose(net(x), ref)


@pytest.mark.parametrize("k,s,p", [(4, 2, 1), (3, 2, 1)])
def test_conv_stacks_pass_gradient_check(k, s, p):
    net = Network([Deconv2D(2, 3, k, s, p), BatchNorm(3), ReLU(), Conv2D(3, 2, 3, 2, 1),
                   BatchNorm(2), LeakyReLU(0.01), Flatten(), Dense(2 * 4 * 4 if k == 4 else 2 * 4 * 4, 2)],
                  (4, 4, 2), seed=2)
    x = np.random.default_rng(0).standard_normal((3, 4, 4, 2))
    assert finite_diff_check(net, x, training=True) < 1e-4
    net.forward(x, training=True)
    assert finite_diff_check(net, x, training=False) < 1e-4


def test_softmax_gradient_check():
    net = Network([Dense(3, 4 * 4 * 2), Reshape((4, 4, 2)), ChannelSoftmax()], (3,), seed=0)
    assert finite_diff_check(net, np.random.default_rng(0).standard_normal((2, 3))) < 1e-4


def test_batchnorm_inference_uses_running_stats():
    bn = BatchNorm(2)
    net = Network([bn], (2,))
    x = np.random.default_rng(0).normal(3.0, 2.0, size=(500, 2))
    for _ in range(200):
        net.forward(x, training=True)
    assert np.allclose(bn.buffers["running_mean"], x.mean(axis=0), atol=1e-6)
    before = {k: v.copy() for k, v in bn.buffers.items()}
    y = net(x, training=False)
    assert np.allclose(y.mean(axis=0), 0.0, atol=1e-2)
    assert all(np.array_equal(before[k], bn.buffers[k]) for k in before)


def test_inference_is_deterministic():
    net = Network([Dense(3, 8), BatchNorm(8), ReLU(), Dense(8, 2)], (3,), seed=0)
    x = np.random.default_rng(0).standard_normal((4, 3))
    assert np.array_equal(net(x), net(x))


def test_leaky_relu_slope_validated():
    with pytest.raises(ValueError):
        LeakyReLU(1.5)


def kl_oracle(p, t):
    total = 0.0
    for pi, ti in zip(p.ravel(), t.ravel()):
        if ti > 0:
            total += ti * np.log(ti / pi)
    return total


def test_kl_identical_is_zero():
    t = np.random.default_rng(0).random((1, 8, 8, 1))
    t /= t.sum()
    assert abs(loss_kl(t, t)[0]) < 1e-14


def test_kl_delta_against_uniform():
    t = np.zeros((1, 32, 32, 1))
    t[0, 5, 7, 0] = 1.0
    p = np.full_like(t, 1 / 1024)
    assert loss_kl(p, t)[0] == pytest.approx(np.log(1024), abs=1e-12)


def test_kl_matches_direct_sum():
    rng = np.random.default_rng(4)
    p = rng.random((1, 6, 6, 2))
    t = rng.random((1, 6, 6, 2))
    t[t < 0.3] = 0.0
    p /= p.sum(axis=(1, 2), keepdims=True)
    t /= t.sum(axis=(1, 2), keepdims=True)
    assert abs(loss_kl(p, t)[0] - kl_oracle(p, t)) < 1e-10


def test_kl_gradient_and_validation():
    rng = np.random.default_rng(5)
    p = rng.random((2, 3, 3, 1)) + 0.1
    t = rng.random((2, 3, 3, 1))
    _, g = loss_kl(p, t)
    e = np.zeros_like(p)
    e[1, 2, 0, 0] = 1e-6
    fd = (loss_kl(p + e, t)[0] - loss_kl(p - e, t)[0]) / 2e-6
    assert abs(fd - g[1, 2, 0, 0]) < 1e-7
    with pytest.raises(ValueError):
        loss_kl(-p, t)


def test_mse_values_and_gradient():
    assert loss_mse(np.ones(2), np.zeros(2))[0] == 1.0
    rng = np.random.default_rng(0)
    a, b = rng.standard_normal(5), rng.standard_normal(5)
    _, g = loss_mse(a, b)
    for i in range(5):
        e = np.zeros(5)
        e[i] = 1e-6
        fd = (loss_mse(a + e, b)[0] - loss_mse(a - e, b)[0]) / 2e-6
        assert abs(fd - g[i]) < 1e-8
    with pytest.raises(ValueError):
        loss_mse(np.ones(2), np.ones(3))


def test_adam_zero_gradient_is_fixed_point():
    w = [np.array([1.0, -2.0])]
    opt = Adam(lr=0.1)
    for _ in range(5):
        adam_step(opt, w, [np.zeros(2)])
    assert w[0].tolist() == [1.0, -2.0]
    assert opt.t == 5


def test_adam_first_step_is_learning_rate():
    w = [np.array([0.0])]
    adam_step(Adam(lr=0.01), w, [np.array([3.7])])
    assert w[0][0] == pytest.approx(-0.01, rel=1e-6)


def test_adam_quadratic():
    w = [np.array([1.0])]
    opt = Adam(lr=0.05)
    for _ in range(200):
        opt.step(w, [2 * w[0]])
    assert abs(w[0][0]) < 0.1


def test_checkpoint_roundtrip(tmp_path):
    net = Network([Dense(3, 16), Reshape((2, 2, 4)), Deconv2D(4, 2), BatchNorm(2), ReLU(),
                   ChannelSoftmax()], (3,), seed=7)
    x = np.random.default_rng(0).standard_normal((5, 3))
    net.forward(x, training=True)
    save_network(net, tmp_path / "net.npz")
    back = load_network(tmp_path / "net.npz")
    assert back.seed == 7
    assert np.array_equal(back(x), net(x))
