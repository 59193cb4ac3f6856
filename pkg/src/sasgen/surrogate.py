"""Two-stage surrogate: parameters -> occupancy grids -> objective and measures."""
from __future__ import annotations

import io
import json
from dataclasses import dataclass

import numpy as np

from .nn import (Adam, BatchNorm, ChannelSoftmax, Conv2D, Deconv2D, Dense, Flatten, LeakyReLU,
                 Network, ReLU, Reshape, loss_mse)
from .nn.checkpoint import pack_network, unpack_network
from .qd.archive import ArchiveSpec, cell_coords

GRID = 32


@dataclass
class Sample:
    theta: np.ndarray           # repaired parameters
    f: float
    m: np.ndarray
    grids: np.ndarray           # (C, 32, 32)


@dataclass
class ModelMetrics:
    mae: np.ndarray             # per head: objective then measures
    hit_rate: float
    manhattan: float


def occupancy_network(n_params: int, channels: int, widths=(8, 4), seed: int = 0) -> Network:
    """Dense to 4x4x64, three stride-2 deconvolutions to 32x32xC, spatial softmax."""
    w1, w2 = widths
    layers = [Dense(n_params, 4 * 4 * 64), Reshape((4, 4, 64)),
              Deconv2D(64, w1), BatchNorm(w1), ReLU(),
              Deconv2D(w1, w2), BatchNorm(w2), ReLU(),
              Deconv2D(w2, channels), ChannelSoftmax()]
    return Network(layers, (n_params,), seed=seed)


class Downstream:
    """Grid branch and parameter branch joined by a linear head."""

    def __init__(self, n_params: int, channels: int, n_out: int, widths=(4, 8), hidden: int = 64,
                 seed: int = 0):
        c1, c2 = widths
        self.grid = Network([Conv2D(channels, c1, 3, 2, 1), BatchNorm(c1), LeakyReLU(0.01),
                             Conv2D(c1, c2, 3, 2, 1), BatchNorm(c2), LeakyReLU(0.01), Flatten()],
                            (GRID, GRID, channels), seed=seed)
        self.param = Network([Dense(n_params, hidden), BatchNorm(hidden), ReLU(),
                              Dense(hidden, hidden), BatchNorm(hidden), ReLU()],
                             (n_params,), seed=seed + 1)
        n_feat = self.grid.output_shape[0] + hidden
        self.head = Network([Dense(n_feat, n_out)], (n_feat,), seed=seed + 2)
        self.nets = (self.grid, self.param, self.head)

    def parameters(self):
        return [p for net in self.nets for p in net.parameters()]

    def forward(self, grid, s, training=False, update_stats=True):
        ga = self.grid.forward(grid, training, update_stats)
        pa = self.param.forward(s, training, update_stats)
        feat = np.concatenate([ga.output, pa.output], axis=1)
        ha = self.head.forward(feat, training, update_stats)
        return ga, pa, ha

    def backward(self, acts, dout):
        ga, pa, ha = acts
        hg, dfeat = self.head.backward(ha, dout)
        k = ga.output.shape[1]
        gg, dgrid = self.grid.backward(ga, dfeat[:, :k])
        pg, ds = self.param.backward(pa, dfeat[:, k:])
        return gg + pg + hg, dgrid, ds


class _Pass:
    def __init__(self, occ, down, output):
        self.occ, self.down, self.output = occ, down, output


class SurrogateModel:
    """Occupancy predictor plus downstream objective / measure predictor.

    Inputs are affine-scaled from the parameter box ``[lows, highs]`` onto
    [-1, 1].  Downstream targets are standardised with the statistics of the
    most recent training set.
    """

    def __init__(self, lows, highs, channels: int, n_measures: int = 2, occ_widths=(8, 4),
                 down_widths=(4, 8), seed: int = 0, lr: float = 1e-4):
        self.lows = np.asarray(lows, dtype=np.float64)
        self.highs = np.asarray(highs, dtype=np.float64)
        self.n = len(self.lows)
        self.channels = channels
        self.k = n_measures
        self.seed = seed
        self.occ_widths, self.down_widths = tuple(occ_widths), tuple(down_widths)
        self.occ = occupancy_network(self.n, channels, occ_widths, seed)
        self.down = Downstream(self.n, channels, n_measures + 1, down_widths, seed=seed + 10)
        self.y_mean = np.zeros(n_measures + 1)
        self.y_std = np.ones(n_measures + 1)
        self.lr = lr
        self.occ_opt = Adam(lr=lr)
        self.down_opt = Adam(lr=lr)
        self.rng = np.random.default_rng(seed + 20)

    # -- composite network view (used by the gradient checker) -----------
    def parameters(self):
        return self.occ.parameters() + self.down.parameters()

    def forward(self, s, training=False, update_stats=True):
        oa = self.occ.forward(s, training, update_stats)
        da = self.down.forward(oa.output, s, training, update_stats)
        return _Pass(oa, da, da[2].output)

    def backward(self, acts: _Pass, dout):
        dgrads, dgrid, ds = self.down.backward(acts.down, dout)
        ograds, ds_occ = self.occ.backward(acts.occ, dgrid)
        return ograds + dgrads, ds + ds_occ

    def relu_pattern(self, acts: _Pass):
        parts = []
        for net, a in [(self.occ, acts.occ)] + list(zip(self.down.nets, acts.down)):
            parts += [a[i] > 0 for i, layer in enumerate(net.layers)
                      if isinstance(layer, (ReLU, LeakyReLU))]
        return np.concatenate([p.ravel() for p in parts])

    # -- prediction ---------------------------------------------------------
    def _check(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape[-1] != self.n:
            raise ValueError(f"expected {self.n} parameters, got {theta.shape[-1]}")
        return theta

    def scale(self, theta):
        return 2.0 * (theta - self.lows) / (self.highs - self.lows) - 1.0

    def predict_occupancy(self, theta) -> np.ndarray:
        """(C, 32, 32) grids for one theta, or (B, C, 32, 32) for a batch."""
        theta = self._check(theta)
        single = theta.ndim == 1
        out = self.occ(self.scale(np.atleast_2d(theta)), training=False)
        out = np.moveaxis(out, -1, 1)
        return out[0] if single else out

    def predict(self, theta):
        """Objective and measures; ``(f, m)`` or batched ``(f[B], m[B, k])``."""
        theta = self._check(theta)
        single = theta.ndim == 1
        y = self.forward(self.scale(np.atleast_2d(theta))).output * self.y_std + self.y_mean
        if single:
            return float(y[0, 0]), y[0, 1:].copy()
        return y[:, 0].copy(), y[:, 1:].copy()

    def predict_with_grads(self, theta):
        """``(f, m, J)`` with ``J`` the (k+1, n) Jacobian of all heads w.r.t. theta.

        Runs in inference mode so the gradient is that of the deployed
        predictor; the occupancy stage is differentiated through as well.
        """
        theta = self._check(theta)
        k1 = self.k + 1
        s = np.repeat(self.scale(theta)[None], k1, axis=0)
        acts = self.forward(s, training=False)
        _, ds = self.backward(acts, np.eye(k1))
        J = ds * (2.0 / (self.highs - self.lows))[None] * self.y_std[:, None]
        y = acts.output[0] * self.y_std + self.y_mean
        return float(y[0]), y[1:].copy(), J

    # -- training -------------------------------------------------------------
    def _batches(self, n: int, batch: int):
        order = self.rng.permutation(n)
        chunks = [order[i:i + batch] for i in range(0, n, batch)]
        # A trailing batch of one would make batch statistics degenerate.
        if len(chunks) > 1 and len(chunks[-1]) == 1:
            chunks[-2] = np.concatenate([chunks[-2], chunks[-1]])
            chunks.pop()
        return chunks

    def train_occupancy(self, dataset, epochs: int = 100, batch: int = 64) -> list[float]:
        """KL training of the occupancy predictor; returns per-epoch mean loss."""
        if not dataset:
            raise ValueError("empty dataset")
        s = self.scale(np.array([d.theta for d in dataset]))
        target = np.moveaxis(np.array([d.grids for d in dataset]), 1, -1)
        ent = np.where(target > 0, target * np.log(np.where(target > 0, target, 1.0)), 0.0)
        ent = ent.reshape(len(dataset), -1).sum(axis=1)
        params = self.occ.parameters()
        body = self.occ.layers[:-1]
        history = []
        for _ in range(epochs):
            total = 0.0
            for idx in self._batches(len(dataset), batch):
                acts = self.occ.forward(s[idx], training=True)
                p = acts.output
                t = target[idx]
                b = len(idx)
                logp = np.log(np.maximum(p, 1e-300))
                total += float(ent[idx].sum() - (t * logp).sum())
                # Softmax followed by KL against a normalised target has logit
                # gradient (p - t) / b, so the softmax layer is bypassed.
                dz = (p - t) / b
                grads = []
                for layer, cache in zip(reversed(body), reversed(acts.caches[:-1])):
                    dz, g = layer.backward(cache, dz)
                    grads.append(g)
                grads.reverse()
                flat = [g[key] for layer, g in zip(body, grads) for key in sorted(layer.params)]
                self.occ_opt.step(params, flat)
            history.append(total / len(dataset))
        return history

    def train_downstream(self, dataset, epochs: int = 100, batch: int = 64) -> list[float]:
        """MSE training on standardised targets, fed by frozen occupancy predictions."""
        if not dataset:
            raise ValueError("empty dataset")
        theta = np.array([d.theta for d in dataset])
        s = self.scale(theta)
        y = np.array([np.r_[d.f, d.m] for d in dataset])
        self.y_mean = y.mean(axis=0)
        std = y.std(axis=0)
        self.y_std = np.where(std > 1e-8, std, 1.0)
        z = (y - self.y_mean) / self.y_std
        grids = self.occ(s, training=False)
        params = self.down.parameters()
        history = []
        for _ in range(epochs):
            total = 0.0
            for idx in self._batches(len(dataset), batch):
                acts = self.down.forward(grids[idx], s[idx], training=True)
                loss, g = loss_mse(acts[2].output, z[idx])
                total += loss * len(idx)
                grads, _, _ = self.down.backward(acts, g)
                self.down_opt.step(params, grads)
            history.append(total / len(dataset))
        return history

    def train(self, dataset, epochs: int = 100, batch: int = 64):
        return self.train_occupancy(dataset, epochs, batch), self.train_downstream(dataset, epochs, batch)

    # -- persistence ----------------------------------------------------------
    def to_bytes(self) -> bytes:
        arrays = {}
        arrays.update(pack_network(self.occ, "occ."))
        for name, net in zip(("grid", "param", "head"), self.down.nets):
            arrays.update(pack_network(net, f"{name}."))
        header = {"format": "sasgen.surrogate", "version": 1, "n": self.n,
                  "channels": self.channels, "k": self.k, "seed": self.seed,
                  "occ_widths": list(self.occ_widths), "down_widths": list(self.down_widths)}
        arrays["header"] = np.frombuffer(json.dumps(header).encode(), dtype=np.uint8)
        for key in ("lows", "highs", "y_mean", "y_std"):
            arrays[key] = getattr(self, key)
        buf = io.BytesIO()
        np.savez(buf, **arrays)
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "SurrogateModel":
        z = np.load(io.BytesIO(data))
        header = json.loads(bytes(z["header"]).decode())
        if header.get("format") != "sasgen.surrogate":
            raise ValueError("not a surrogate checkpoint")
        model = cls(z["lows"], z["highs"], header["channels"], header["k"], header["occ_widths"],
                    header["down_widths"], header["seed"])
        model.occ = unpack_network(z, "occ.")
        nets = [unpack_network(z, f"{name}.") for name in ("grid", "param", "head")]
        model.down.grid, model.down.param, model.down.head = nets
        model.down.nets = tuple(nets)
        model.y_mean, model.y_std = z["y_mean"].copy(), z["y_std"].copy()
        return model

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "SurrogateModel":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def evaluate_model(model: SurrogateModel, test, spec: ArchiveSpec) -> ModelMetrics:
    """Per-head MAE, archive cell hit rate and mean Manhattan cell distance."""
    if not test:
        raise ValueError("empty test set")
    theta = np.array([d.theta for d in test])
    f, m = model.predict(theta)
    pred = np.column_stack([f, m])
    true = np.array([np.r_[d.f, d.m] for d in test])
    mae = np.abs(pred - true).mean(axis=0)
    pc = np.array([cell_coords(spec, row) for row in pred[:, 1:]])
    tc = np.array([cell_coords(spec, row) for row in true[:, 1:]])
    hits = np.all(pc == tc, axis=1)
    manhattan = np.abs(pc - tc).sum(axis=1)
    return ModelMetrics(mae, float(hits.mean()), float(manhattan.mean()))
