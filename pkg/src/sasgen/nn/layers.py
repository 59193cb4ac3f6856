"""Layer primitives with explicit forward and backward passes.

Arrays are float64 numpy arrays. Image tensors are channels-last, (B, H, W, C).
Every layer exposes ``forward(x, training, update_stats) -> (y, cache)``
and ``backward(cache, dy) -> (dx, grads)`` where ``grads`` maps parameter
names to arrays shaped like ``layer.params[name]``.
"""
from __future__ import annotations

import numpy as np


class Layer:
    kind = "Layer"

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.buffers: dict[str, np.ndarray] = {}

    def init(self, rng: np.random.Generator) -> None:
        pass

    def output_shape(self, in_shape: tuple) -> tuple:
        return in_shape

    def forward(self, x, training=False, update_stats=True):
        raise NotImplementedError

    def backward(self, cache, dy):
        raise NotImplementedError

    def spec(self) -> dict:
        return {"kind": self.kind}


def _he_uniform(rng, fan_in, shape):
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Dense(Layer):
    kind = "Dense"

    def __init__(self, fan_in: int, fan_out: int):
        super().__init__()
        self.fan_in, self.fan_out = fan_in, fan_out
        self.params = {"W": np.zeros((fan_in, fan_out)), "b": np.zeros(fan_out)}

    def init(self, rng):
        self.params["W"] = _he_uniform(rng, self.fan_in, (self.fan_in, self.fan_out))
        self.params["b"] = np.zeros(self.fan_out)

    def output_shape(self, in_shape):
        if in_shape != (self.fan_in,):
            raise ValueError(f"Dense expects ({self.fan_in},), got {in_shape}")
        return (self.fan_out,)

    def forward(self, x, training=False, update_stats=True):
        return x @ self.params["W"] + self.params["b"], x

    def backward(self, cache, dy):
        x = cache
        grads = {"W": x.T @ dy, "b": dy.sum(axis=0)}
        return dy @ self.params["W"].T, grads

    def spec(self):
        return {"kind": self.kind, "fan_in": self.fan_in, "fan_out": self.fan_out}


def _im2col(x, k, stride, pad):
    """(B, H, W, C) -> columns (B*Ho*Wo, k*k*C) plus output size."""
    if pad:
        x = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    b, hp, wp, c = x.shape
    ho, wo = (hp - k) // stride + 1, (wp - k) // stride + 1
    cols = np.empty((b, ho, wo, k, k, c))
    for i in range(k):
        for j in range(k):
            cols[:, :, :, i, j, :] = x[:, i:i + stride * ho:stride, j:j + stride * wo:stride, :]
    return cols.reshape(b * ho * wo, k * k * c), ho, wo


def _col2im(cols, b, h, w, c, k, stride, pad, ho, wo):
    """Adjoint of ``_im2col``: scatter-add columns back into an image."""
    hp, wp = h + 2 * pad, w + 2 * pad
    out = np.zeros((b, hp, wp, c))
    cols = cols.reshape(b, ho, wo, k, k, c)
    for i in range(k):
        for j in range(k):
            out[:, i:i + stride * ho:stride, j:j + stride * wo:stride, :] += cols[:, :, :, i, j, :]
    if pad:
        out = out[:, pad:hp - pad, pad:wp - pad, :]
    return out

# Kernel 4, stride 2, padding 1: output row 2m + p receives kernel rows
# _TAPS[p] taken from input row m + shift.
_TAPS = {0: ((1, 0), (3, -1)), 1: ((2, 0), (0, 1))}


def _shift_slices(n, shift):
    """(dst, src) slices realising dst[m] <- src[m + shift] on length n."""
    if shift == 0:
        return slice(0, n), slice(0, n)
    if shift < 0:
        return slice(-shift, n), slice(0, n + shift)
    return slice(0, n - shift), slice(shift, n)


def _deconv421_scatter(taps):
    """taps (B, h, w, 4, 4, C) -> image (B, 2h, 2w, C), one output phase at a time."""
    b, h, w, _, _, c = taps.shape
    out = np.empty((b, h, 2, w, 2, c))
    for py in (0, 1):
        for px in (0, 1):
            acc = np.zeros((b, h, w, c))
            for ky, sy in _TAPS[py]:
                dr, sr = _shift_slices(h, sy)
                for kx, sx in _TAPS[px]:
                    dc, sc = _shift_slices(w, sx)
                    acc[:, dr, dc] += taps[:, sr, sc, ky, kx]
            out[:, :, py, :, px] = acc
    return out.reshape(b, 2 * h, 2 * w, c)


def _deconv421_gather(dy):
    """Adjoint of ``_deconv421_scatter``."""
    b, h2, w2, c = dy.shape
    h, w = h2 // 2, w2 // 2
    view = dy.reshape(b, h, 2, w, 2, c)
    taps = np.zeros((b, h, w, 4, 4, c))
    for py in (0, 1):
        for px in (0, 1):
            phase = view[:, :, py, :, px]
            for ky, sy in _TAPS[py]:
                dr, sr = _shift_slices(h, sy)
                for kx, sx in _TAPS[px]:
                    dc, sc = _shift_slices(w, sx)
                    taps[:, sr, sc, ky, kx] = phase[:, dr, dc]
    return taps


class Conv2D(Layer):
    """2-D convolution on (B, H, W, C) images with zero padding."""
    kind = "Conv2D"

    def __init__(self, c_in: int, c_out: int, kernel: int = 3, stride: int = 1, padding: int = 0):
        super().__init__()
        self.c_in, self.c_out = c_in, c_out
        self.kernel, self.stride, self.padding = kernel, stride, padding
        self.params = {"W": np.zeros((kernel * kernel * c_in, c_out)), "b": np.zeros(c_out)}

    def init(self, rng):
        fan_in = self.c_in * self.kernel ** 2
        self.params["W"] = _he_uniform(rng, fan_in, self.params["W"].shape)
        self.params["b"] = np.zeros(self.c_out)

    def output_shape(self, in_shape):
        h, w, c = in_shape
        if c != self.c_in:
            raise ValueError(f"Conv2D expects {self.c_in} channels, got {c}")
        k, s, p = self.kernel, self.stride, self.padding
        ho, wo = (h + 2 * p - k) // s + 1, (w + 2 * p - k) // s + 1
        if ho < 1 or wo < 1:
            raise ValueError(f"Conv2D output would be empty for input {in_shape}")
        return (ho, wo, self.c_out)

    def forward(self, x, training=False, update_stats=True):
        b = x.shape[0]
        cols, ho, wo = _im2col(x, self.kernel, self.stride, self.padding)
        y = cols @ self.params["W"] + self.params["b"]
        return y.reshape(b, ho, wo, self.c_out), (cols, x.shape, ho, wo)

    def backward(self, cache, dy):
        cols, (b, h, w, c), ho, wo = cache
        dy2 = dy.reshape(b * ho * wo, self.c_out)
        grads = {"W": cols.T @ dy2, "b": dy2.sum(axis=0)}
        dcols = dy2 @ self.params["W"].T
        dx = _col2im(dcols, b, h, w, c, self.kernel, self.stride, self.padding, ho, wo)
        return dx, grads

    def spec(self):
        return {"kind": self.kind, "c_in": self.c_in, "c_out": self.c_out,
                "kernel": self.kernel, "stride": self.stride, "padding": self.padding}


class Deconv2D(Layer):
    """Transposed convolution; output size (H - 1) * stride - 2 * padding + kernel."""
    kind = "Deconv2D"

    def __init__(self, c_in: int, c_out: int, kernel: int = 4, stride: int = 2, padding: int = 1):
        super().__init__()
        self.c_in, self.c_out = c_in, c_out
        self.kernel, self.stride, self.padding = kernel, stride, padding
        self.params = {"W": np.zeros((c_in, kernel * kernel * c_out)), "b": np.zeros(c_out)}

    def init(self, rng):
        # Each output pixel sees roughly c_in * (k / s)^2 inputs.
        fan_in = max(1, self.c_in * (self.kernel // self.stride) ** 2)
        self.params["W"] = _he_uniform(rng, fan_in, self.params["W"].shape)
        self.params["b"] = np.zeros(self.c_out)

    def _out_hw(self, h, w):
        k, s, p = self.kernel, self.stride, self.padding
        return (h - 1) * s - 2 * p + k, (w - 1) * s - 2 * p + k

    def output_shape(self, in_shape):
        h, w, c = in_shape
        if c != self.c_in:
            raise ValueError(f"Deconv2D expects {self.c_in} channels, got {c}")
        ho, wo = self._out_hw(h, w)
        if ho < 1 or wo < 1:
            raise ValueError(f"Deconv2D output would be empty for input {in_shape}")
        return (ho, wo, self.c_out)

    @property
    def _phased(self):
        return (self.kernel, self.stride, self.padding) == (4, 2, 1)

    def forward(self, x, training=False, update_stats=True):
        b, h, w, c = x.shape
        ho, wo = self._out_hw(h, w)
        xr = x.reshape(b * h * w, c)
        cols = xr @ self.params["W"]
        if self._phased:
            y = _deconv421_scatter(cols.reshape(b, h, w, 4, 4, self.c_out))
        else:
            # Transposed convolution is the adjoint of a convolution with the same geometry.
            y = _col2im(cols, b, ho, wo, self.c_out, self.kernel, self.stride, self.padding, h, w)
        y += self.params["b"]
        return y, (xr, x.shape)

    def backward(self, cache, dy):
        xr, (b, h, w, c) = cache
        if self._phased:
            dcols = _deconv421_gather(dy).reshape(b * h * w, -1)
        else:
            dcols, _, _ = _im2col(dy, self.kernel, self.stride, self.padding)
        grads = {"W": xr.T @ dcols, "b": dy.sum(axis=(0, 1, 2))}
        dx = (dcols @ self.params["W"].T).reshape(b, h, w, c)
        return dx, grads

    def spec(self):
        return {"kind": self.kind, "c_in": self.c_in, "c_out": self.c_out,
                "kernel": self.kernel, "stride": self.stride, "padding": self.padding}


class BatchNorm(Layer):
    """Batch normalization of the last axis: features (B, F) or channels (B, H, W, C)."""
    kind = "BatchNorm"

    def __init__(self, num_features: int, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__()
        self.num_features, self.momentum, self.eps = num_features, momentum, eps
        self.params = {"gamma": np.ones(num_features), "beta": np.zeros(num_features)}
        self.buffers = {"running_mean": np.zeros(num_features), "running_var": np.ones(num_features)}

    def init(self, rng):
        self.params["gamma"] = np.ones(self.num_features)
        self.params["beta"] = np.zeros(self.num_features)
        self.buffers["running_mean"] = np.zeros(self.num_features)
        self.buffers["running_var"] = np.ones(self.num_features)

    def output_shape(self, in_shape):
        if in_shape[-1] != self.num_features:
            raise ValueError(f"BatchNorm expects {self.num_features} features, got {in_shape}")
        return in_shape

    def forward(self, x, training=False, update_stats=True):
        flat = x.reshape(-1, self.num_features)
        if training:
            n = flat.shape[0]
            # Column sums through a matrix-vector product are much faster
            # than axis-0 reductions when the feature axis is short.
            ones = np.ones(n)
            mean = (ones @ flat) / n
            centered = flat - mean
            var = (ones @ (centered * centered)) / n
            if update_stats:
                unbiased = var * n / (n - 1) if n > 1 else var
                m = self.momentum
                self.buffers["running_mean"] = (1 - m) * self.buffers["running_mean"] + m * mean
                self.buffers["running_var"] = (1 - m) * self.buffers["running_var"] + m * unbiased
        else:
            centered = flat - self.buffers["running_mean"]
            var = self.buffers["running_var"]
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = centered * inv_std
        y = xhat * self.params["gamma"] + self.params["beta"]
        return y.reshape(x.shape), (xhat, inv_std, training)

    def backward(self, cache, dy):
        xhat, inv_std, training = cache
        shape = dy.shape
        dy = dy.reshape(-1, self.num_features)
        ones = np.ones(dy.shape[0])
        dgamma = ones @ (dy * xhat)
        dbeta = ones @ dy
        grads = {"gamma": dgamma, "beta": dbeta}
        scale = self.params["gamma"] * inv_std
        if not training:
            return (dy * scale).reshape(shape), grads
        n = dy.shape[0]
        # dx = gamma * inv_std * (dy - mean(dy) - xhat * mean(dy * xhat))
        dx = (dy - dbeta / n - xhat * (dgamma / n)) * scale
        return dx.reshape(shape), grads

    def spec(self):
        return {"kind": self.kind, "num_features": self.num_features,
                "momentum": self.momentum, "eps": self.eps}


class ReLU(Layer):
    kind = "ReLU"

    def forward(self, x, training=False, update_stats=True):
        mask = x > 0
        return x * mask, mask

    def backward(self, cache, dy):
        return dy * cache, {}


class LeakyReLU(Layer):
    kind = "LeakyReLU"

    def __init__(self, slope: float = 0.01):
        super().__init__()
        if not 0.0 < slope < 1.0:
            raise ValueError("LeakyReLU slope must lie in (0, 1)")
        self.slope = slope

    def forward(self, x, training=False, update_stats=True):
        scale = np.where(x > 0, 1.0, self.slope)
        return x * scale, scale

    def backward(self, cache, dy):
        return dy * cache, {}

    def spec(self):
        return {"kind": self.kind, "slope": self.slope}


class ChannelSoftmax(Layer):
    """Softmax over the spatial cells of each channel of a (B, H, W, C) tensor."""
    kind = "ChannelSoftmax"

    def forward(self, x, training=False, update_stats=True):
        b, c = x.shape[0], x.shape[-1]
        z = x.reshape(b, -1, c)
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        p = (e / e.sum(axis=1, keepdims=True)).reshape(x.shape)
        return p, p

    def backward(self, cache, dy):
        p = cache
        b, c = p.shape[0], p.shape[-1]
        pf, gf = p.reshape(b, -1, c), dy.reshape(b, -1, c)
        dx = pf * (gf - (pf * gf).sum(axis=1, keepdims=True))
        return dx.reshape(p.shape), {}


class Reshape(Layer):
    kind = "Reshape"

    def __init__(self, shape: tuple):
        super().__init__()
        self.shape = tuple(int(s) for s in shape)

    def output_shape(self, in_shape):
        if int(np.prod(in_shape)) != int(np.prod(self.shape)):
            raise ValueError(f"cannot reshape {in_shape} to {self.shape}")
        return self.shape

    def forward(self, x, training=False, update_stats=True):
        return x.reshape((x.shape[0],) + self.shape), x.shape

    def backward(self, cache, dy):
        return dy.reshape(cache), {}

    def spec(self):
        return {"kind": self.kind, "shape": list(self.shape)}


class Flatten(Layer):
    kind = "Flatten"

    def output_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def forward(self, x, training=False, update_stats=True):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, cache, dy):
        return dy.reshape(cache), {}


LAYER_KINDS = {cls.kind: cls for cls in
               (Dense, Conv2D, Deconv2D, BatchNorm, ReLU, LeakyReLU, ChannelSoftmax, Reshape, Flatten)}


def layer_from_spec(spec: dict) -> Layer:
    spec = dict(spec)
    cls = LAYER_KINDS[spec.pop("kind")]
    if "shape" in spec:
        spec["shape"] = tuple(spec["shape"])
    return cls(**spec)
