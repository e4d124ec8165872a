"""Small numpy MLPs with hand-written backprop and an Adam optimizer."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

LossFn = Callable[[np.ndarray], tuple]  # output -> (scalar loss, dloss/doutput)


class Network:
    """Fully connected net: relu hidden layers, identity or tanh output.

    ``weights[i]`` has shape ``(sizes[i], sizes[i+1])``.
    """

    def __init__(self, weights: Sequence[np.ndarray], biases: Sequence[np.ndarray],
                 out_activation: str = "identity", dtype=np.float64):
        if out_activation not in ("identity", "tanh"):
            raise ValueError(f"unsupported output activation {out_activation!r}")
        weights = [np.asarray(w) for w in weights]
        biases = [np.asarray(b) for b in biases]
        if len(weights) != len(biases) or not weights:
            raise ValueError("need one bias per weight matrix")
        for w, w_next in zip(weights, weights[1:]):
            if w.shape[1] != w_next.shape[0]:
                raise ValueError(f"layer shapes {w.shape} and {w_next.shape} do not compose")
        for w, b in zip(weights, biases):
            if b.shape != (w.shape[1],):
                raise ValueError(f"bias shape {b.shape} does not match weights {w.shape}")
        self.dtype = np.dtype(dtype)
        self.out_activation = out_activation
        shapes = []
        for w, b in zip(weights, biases):
            shapes += [np.shape(w), np.shape(b)]
        self.flat, views = _flat_views(shapes, self.dtype)
        for view, arr in zip(views, [x for pair in zip(weights, biases) for x in pair]):
            view[...] = arr
        self.weights = views[0::2]
        self.biases = views[1::2]

    def __getstate__(self):
        return {"flat": self.flat, "shapes": self.shapes, "dtype": self.dtype.name,
                "out_activation": self.out_activation}

    def __setstate__(self, state):
        self.dtype = np.dtype(state["dtype"])
        self.out_activation = state["out_activation"]
        self.flat, views = _flat_views(state["shapes"], self.dtype)
        self.flat[...] = state["flat"]
        self.weights = views[0::2]
        self.biases = views[1::2]

    @classmethod
    def init(cls, sizes: Sequence[int], rng: np.random.Generator,
             out_activation: str = "identity", dtype=np.float64) -> "Network":
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            biases.append(rng.uniform(-bound, bound, size=fan_out))
        return cls(weights, biases, out_activation, dtype)

    @property
    def sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def params(self) -> list[np.ndarray]:
        """Views into ``flat`` ordered ``W1, b1, W2, b2, ...``."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    @property
    def shapes(self) -> list[tuple]:
        return [p.shape for p in self.weights_and_biases()]

    def weights_and_biases(self):
        for w, b in zip(self.weights, self.biases):
            yield w
            yield b

    def copy(self) -> "Network":
        return Network([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                       self.out_activation, self.dtype)

    def _check_input(self, x):
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[1] != self.weights[0].shape[0]:
            raise ValueError(f"input has {x.shape[1]} columns, network expects {self.weights[0].shape[0]}")
        return x

    def forward(self, x) -> np.ndarray:
        h = self._check_input(x)
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.maximum(h, 0.0)
        return np.tanh(h) if self.out_activation == "tanh" else h

    __call__ = forward

    def forward_cached(self, x):
        h = self._check_input(x)
        acts = [h]
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.maximum(h, 0.0)
            acts.append(h)
        out = np.tanh(h) if self.out_activation == "tanh" else h
        return out, (acts, out)

    def backward(self, cache, grad_out: np.ndarray, input_grad: bool = True):
        """Return ``(param_grads, grad_input)`` given dloss/doutput.

        ``param_grads`` is a list of views into one flat array (see :func:`flatten`).
        ``grad_input`` is None when ``input_grad`` is False.
        """
        acts, out = cache
        g = np.asarray(grad_out, dtype=self.dtype)
        if self.out_activation == "tanh":
            g = g * (1.0 - out * out)
        flat, grads = _flat_views(self.shapes, self.dtype)
        for i in range(len(self.weights) - 1, -1, -1):
            np.matmul(acts[i].T, g, out=grads[2 * i])
            np.sum(g, axis=0, out=grads[2 * i + 1])
            if i == 0 and not input_grad:
                return grads, None
            g = g @ self.weights[i].T
            if i > 0:
                g = g * (acts[i] > 0.0)
        return grads, g

    def set_params(self, params: Sequence[np.ndarray]) -> None:
        for view, arr in zip(self.params, params):
            view[...] = arr

    def to_dict(self) -> dict:
        return {
            "sizes": self.sizes,
            "out_activation": self.out_activation,
            "dtype": self.dtype.name,
            "params": [p.ravel().tolist() for p in self.params],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Network":
        sizes = doc["sizes"]
        flat = doc["params"]
        dtype = np.dtype(doc.get("dtype", "float64"))
        weights, biases = [], []
        for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            weights.append(np.asarray(flat[2 * i], dtype=dtype).reshape(n_in, n_out))
            biases.append(np.asarray(flat[2 * i + 1], dtype=dtype))
        return cls(weights, biases, doc.get("out_activation", "identity"), dtype)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "Network":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _flat_views(shapes, dtype):
    sizes = [sh[0] * sh[1] if len(sh) == 2 else sh[0] for sh in shapes]
    flat = np.zeros(sum(sizes), dtype=dtype)
    views, start = [], 0
    for sh, n in zip(shapes, sizes):
        views.append(flat[start:start + n].reshape(sh))
        start += n
    return flat, views


def flatten(arrays: Sequence[np.ndarray]) -> np.ndarray:
    """Concatenate arrays in order; free when they are consecutive views of one buffer."""
    base = arrays[0].base
    if base is not None and all(a.base is base for a in arrays) and \
            sum(a.size for a in arrays) == base.size:
        return base
    return np.concatenate([np.ravel(a) for a in arrays])


def forward(net: Network, batch) -> np.ndarray:
    return net.forward(batch)


def grad(net: Network, batch, loss: LossFn):
    """Evaluate ``loss(net(batch))`` and its gradient w.r.t. every parameter.

    Returns ``(loss_value, grads)`` with ``grads`` ordered like ``net.params``.
    """
    out, cache = net.forward_cached(batch)
    value, dout = loss(out)
    if not np.isfinite(value):
        raise FloatingPointError(f"loss is not finite: {value}")
    grads, _ = net.backward(cache, dout)
    return float(value), grads


def soft_update(target: Network, source: Network, tau: float) -> None:
    target.flat *= 1.0 - tau
    target.flat += tau * source.flat


class Adam:
    def __init__(self, net: Network, lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0 or eps <= 0 or not (0 < beta1 < 1) or not (0 < beta2 < 1):
            raise ValueError("invalid Adam hyperparameters")
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros_like(net.flat)
        self.v = np.zeros_like(net.flat)
        self.t = 0

    def step(self, net: Network, grads: Sequence[np.ndarray]) -> Network:
        if len(grads) != len(net.weights) * 2:
            raise ValueError("gradient list does not match parameters")
        for g, shape in zip(grads, net.shapes):
            if g.shape != shape:
                raise ValueError(f"gradient shape {g.shape} != parameter shape {shape}")
        g = flatten(grads)
        if not np.isfinite(g).all():
            raise FloatingPointError("non-finite gradient")
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        self.m *= self.beta1
        self.m += (1.0 - self.beta1) * g
        self.v *= self.beta2
        self.v += (1.0 - self.beta2) * (g * g)
        net.flat -= (self.lr / c1) * self.m / (np.sqrt(self.v / c2) + self.eps)
        return net

    def state_dict(self) -> dict:
        return {"lr": self.lr, "beta1": self.beta1, "beta2": self.beta2, "eps": self.eps,
                "t": self.t, "m": self.m.tolist(), "v": self.v.tolist()}

    def load_state_dict(self, doc: dict) -> None:
        self.lr, self.beta1, self.beta2, self.eps = doc["lr"], doc["beta1"], doc["beta2"], doc["eps"]
        self.t = doc["t"]
        self.m = np.asarray(doc["m"], dtype=self.m.dtype)
        self.v = np.asarray(doc["v"], dtype=self.v.dtype)


def adam_step(opt: Adam, net: Network, grads) -> Network:
    return opt.step(net, grads)


def mse_loss(target: np.ndarray) -> LossFn:
    """Mean squared error over the batch (single-output nets)."""
    target = np.asarray(target, dtype=float).reshape(-1, 1)

    def loss(out):
        diff = out - target
        return float(np.mean(diff ** 2)), 2.0 * diff / diff.size
    return loss
