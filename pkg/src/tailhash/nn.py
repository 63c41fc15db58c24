"""Minimal dense-network substrate: float64 matrices, manual backprop, SGD.

Learning code follows the samples-as-columns convention: a batch of n inputs
to a layer with ``in_dim`` units is an ``(in_dim, n)`` array and the output is
``(out_dim, n)``. Dataset files store samples as rows; loaders and module
boundaries transpose.

Everything is plain numpy float64. There is no autodiff graph: each public
loss in the repository assembles its gradient from the analytic layer-wise
backward pass here, and is checked against :func:`finite_diff_grad`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class NumericsError(RuntimeError):
    """A public operation produced or received non-finite values."""


def check_finite(arr: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NumericsError(f"non-finite values in {what}")
    return arr


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # branch form: never exponentiates a large positive argument
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    return _sigmoid(np.asarray(z, dtype=np.float64))


def softplus(z: np.ndarray) -> np.ndarray:
    """log(1 + e^z) without overflow for large z."""
    z = np.asarray(z, dtype=np.float64)
    return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))


# name -> (f(z), f'(z) expressed via pre-activation z and output a)
ACTIVATIONS: dict[str, tuple[Callable, Callable]] = {
    "identity": (lambda z: z, lambda z, a: np.ones_like(z)),
    "tanh": (np.tanh, lambda z, a: 1.0 - a * a),
    "sigmoid": (_sigmoid, lambda z, a: a * (1.0 - a)),
    "relu": (lambda z: np.maximum(z, 0.0), lambda z, a: (z > 0.0).astype(z.dtype)),
}


@dataclass
class DenseLayer:
    weight: np.ndarray  # (out_dim, in_dim)
    bias: np.ndarray    # (out_dim,)
    activation: str = "identity"

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ValueError("weight must be (out, in) with matching bias")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]


@dataclass
class Mlp:
    layers: list[DenseLayer] = field(default_factory=list)

    def __post_init__(self):
        for a, b in zip(self.layers, self.layers[1:]):
            if a.out_dim != b.in_dim:
                raise ValueError(
                    f"layer dims do not chain: {a.out_dim} -> {b.in_dim}")

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim


def init_dense(in_dim: int, out_dim: int, activation: str,
               rng: np.random.Generator) -> DenseLayer:
    """Uniform init in [-a, a] with a = sqrt(6 / (in + out)); zero bias."""
    a = np.sqrt(6.0 / (in_dim + out_dim))
    w = rng.uniform(-a, a, size=(out_dim, in_dim))
    return DenseLayer(w, np.zeros(out_dim), activation)


def init_mlp(dims: Sequence[int], rng: np.random.Generator,
             hidden_activation: str = "tanh",
             output_activation: str = "identity") -> Mlp:
    """Fully connected net over the dimension chain ``dims``."""
    layers = []
    for i, (din, dout) in enumerate(zip(dims, dims[1:])):
        act = output_activation if i == len(dims) - 2 else hidden_activation
        layers.append(init_dense(din, dout, act, rng))
    return Mlp(layers)


def forward(mlp: Mlp, x: np.ndarray) -> tuple[np.ndarray, list]:
    """Run a batch through the net.

    ``x`` is (in_dim, n). Returns the (out_dim, n) output and a tape of
    per-layer (input, pre-activation, post-activation) triples for backward.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != mlp.in_dim:
        raise ValueError(
            f"input has {x.shape[0] if x.ndim == 2 else '?'} rows, "
            f"net expects {mlp.in_dim}")
    tape = []
    for layer in mlp.layers:
        z = layer.weight @ x + layer.bias[:, None]
        a = ACTIVATIONS[layer.activation][0](z)
        tape.append((x, z, a))
        x = a
    check_finite(x, "forward output")
    return x, tape


def backward(mlp: Mlp, tape: list, upstream: np.ndarray
             ) -> tuple[list[tuple[np.ndarray, np.ndarray]], np.ndarray]:
    """Backprop an upstream d(loss)/d(output) through the net.

    Returns ([(dW, db) per layer, in layer order], d(loss)/d(input)).
    """
    if len(tape) != len(mlp.layers):
        raise ValueError("tape does not match net depth")
    da = np.asarray(upstream, dtype=np.float64)
    if da.shape != tape[-1][2].shape:
        raise ValueError("upstream gradient shape does not match output")
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(mlp.layers)
    for i in range(len(mlp.layers) - 1, -1, -1):
        layer = mlp.layers[i]
        x, z, a = tape[i]
        dz = da * ACTIVATIONS[layer.activation][1](z, a)
        grads[i] = (dz @ x.T, dz.sum(axis=1))
        da = layer.weight.T @ dz
    return grads, da


def zero_grads(mlp: Mlp) -> list[tuple[np.ndarray, np.ndarray]]:
    return [(np.zeros_like(l.weight), np.zeros_like(l.bias))
            for l in mlp.layers]


def add_grads(acc: list, extra: list, scale: float = 1.0) -> list:
    """acc += scale * extra, elementwise over (dW, db) pairs."""
    return [(gw + scale * ew, gb + scale * eb)
            for (gw, gb), (ew, eb) in zip(acc, extra)]


def sgd_step(mlp: Mlp, grads: list, learning_rate: float) -> Mlp:
    """In-place p <- p - lr * g over every weight and bias."""
    if learning_rate < 0:
        raise ValueError("learning rate must be non-negative")
    for layer, (dw, db) in zip(mlp.layers, grads):
        check_finite(dw, "weight gradient")
        check_finite(db, "bias gradient")
        layer.weight -= learning_rate * dw
        layer.bias -= learning_rate * db
    return mlp


def finite_diff_grad(fn: Callable[[np.ndarray], float], point: np.ndarray,
                     eps: float = 1e-5) -> np.ndarray:
    """Central-difference gradient estimate of a scalar function, per coordinate."""
    point = np.asarray(point, dtype=np.float64)
    grad = np.zeros_like(point)
    it = np.nditer(point, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        p = point.copy()
        p[idx] += eps
        f_plus = fn(p)
        p[idx] -= 2 * eps
        f_minus = fn(p)
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NumericsError("non-finite function value in finite_diff_grad")
        grad[idx] = (f_plus - f_minus) / (2 * eps)
    return grad


# -- flat parameter views (used by gradient-check harnesses) --

def get_flat(mlp: Mlp) -> np.ndarray:
    return np.concatenate([np.concatenate([l.weight.ravel(), l.bias])
                           for l in mlp.layers])


def set_flat(mlp: Mlp, vec: np.ndarray) -> None:
    pos = 0
    for layer in mlp.layers:
        nw = layer.weight.size
        layer.weight = vec[pos:pos + nw].reshape(layer.weight.shape).copy()
        pos += nw
        nb = layer.bias.size
        layer.bias = vec[pos:pos + nb].copy()
        pos += nb
    if pos != vec.size:
        raise ValueError("flat vector length does not match net")


def flat_grads(grads: list) -> np.ndarray:
    return np.concatenate([np.concatenate([dw.ravel(), db])
                           for dw, db in grads])
