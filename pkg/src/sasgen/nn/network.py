from __future__ import annotations

import numpy as np

from .layers import Layer, layer_from_spec


class ForwardPass(list):
    """Activations of one forward call: ``[input, out_0, ..., out_{L-1}]``.

    Also carries the per-layer caches and the mode so ``Network.backward``
    can be called with just this object.
    """

    def __init__(self, activations, caches, training, net_id):
        super().__init__(activations)
        self.caches = caches
        self.training = training
        self.net_id = net_id

    @property
    def output(self):
        return self[-1]


class Network:
    """A sequential stack of layers operating on a leading batch axis."""

    def __init__(self, layers: list[Layer], input_shape: tuple, seed: int | None = None):
        self.layers = list(layers)
        self.input_shape = tuple(input_shape)
        self.seed = seed
        self.training = False
        shape = self.input_shape
        self.shapes = [shape]
        for idx, layer in enumerate(self.layers):
            try:
                shape = layer.output_shape(shape)
            except ValueError as exc:
                raise ValueError(f"layer {idx} ({layer.kind}): {exc}") from None
            self.shapes.append(shape)
        if seed is not None:
            self.init(seed)

    @property
    def output_shape(self):
        return self.shapes[-1]

    def init(self, seed: int) -> None:
        self.seed = seed
        rng = np.random.default_rng(seed)
        for layer in self.layers:
            layer.init(rng)

    def parameters(self) -> list[np.ndarray]:
        """Parameter arrays in a fixed order (layer order, then name order)."""
        return [layer.params[k] for layer in self.layers for k in sorted(layer.params)]

    def set_parameters(self, arrays) -> None:
        arrays = list(arrays)
        i = 0
        for layer in self.layers:
            for k in sorted(layer.params):
                if arrays[i].shape != layer.params[k].shape:
                    raise ValueError(f"parameter shape mismatch for {layer.kind}.{k}")
                layer.params[k] = arrays[i]
                i += 1

    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def forward(self, x, training: bool | None = None, update_stats: bool = True) -> ForwardPass:
        training = self.training if training is None else training
        x = np.asarray(x, dtype=np.float64)
        if x.shape[1:] != self.input_shape:
            raise ValueError(f"layer 0 ({self.layers[0].kind}): expected input "
                             f"(B,)+{self.input_shape}, got {x.shape}")
        acts, caches = [x], []
        for layer in self.layers:
            x, cache = layer.forward(x, training=training, update_stats=update_stats)
            acts.append(x)
            caches.append(cache)
        return ForwardPass(acts, caches, training, id(self))

    def __call__(self, x, training: bool | None = None):
        return self.forward(x, training).output

    def backward(self, acts: ForwardPass, output_grad):
        """Return ``(param_grads, input_grad)``.

        ``param_grads`` is aligned with ``parameters()``.
        """
        if (not isinstance(acts, ForwardPass) or acts.net_id != id(self)
                or len(acts) != len(self.layers) + 1):
            raise ValueError("activations do not come from a forward call of this network")
        dy = np.asarray(output_grad, dtype=np.float64)
        if dy.shape != acts.output.shape:
            raise ValueError(f"output_grad shape {dy.shape} != output shape {acts.output.shape}")
        per_layer = []
        for layer, cache in zip(reversed(self.layers), reversed(acts.caches)):
            dy, grads = layer.backward(cache, dy)
            per_layer.append(grads)
        per_layer.reverse()
        flat = [g[k] for layer, g in zip(self.layers, per_layer) for k in sorted(layer.params)]
        return flat, dy

    def state(self) -> dict:
        """Serializable state: specs, parameters and running statistics."""
        return {
            "input_shape": list(self.input_shape),
            "seed": self.seed,
            "layers": [layer.spec() for layer in self.layers],
            "params": [{k: v.copy() for k, v in layer.params.items()} for layer in self.layers],
            "buffers": [{k: v.copy() for k, v in layer.buffers.items()} for layer in self.layers],
        }

    @classmethod
    def from_state(cls, state: dict) -> "Network":
        layers = [layer_from_spec(s) for s in state["layers"]]
        net = cls(layers, tuple(state["input_shape"]), seed=None)
        net.seed = state.get("seed")
        for layer, p, b in zip(net.layers, state["params"], state["buffers"]):
            layer.params = {k: np.array(v, dtype=np.float64) for k, v in p.items()}
            layer.buffers = {k: np.array(v, dtype=np.float64) for k, v in b.items()}
        return net
