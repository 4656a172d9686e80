"""Fully connected ReLU network, Adam optimizer, and model serialization.

The network is deliberately small: dense layers with ReLU hidden
activations and a linear output. Plain-numpy inference paths (forward,
input Jacobian, forward-with-tangent) serve evaluation and simulation;
training builds an autodiff graph with the same parameters (see
:mod:`frictionlab.pinn`).
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np


class NonFiniteGradientError(RuntimeError):
    """A parameter received a non-finite gradient during optimization."""


@dataclass
class Mlp:
    """Weights and biases of a feed-forward ReLU network.

    ``weights[i]`` has shape (fan_in, fan_out); hidden layers use ReLU,
    the output layer is linear.
    """

    weights: list
    biases: list

    @property
    def layer_sizes(self):
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def dtype(self):
        return self.weights[0].dtype

    def copy(self):
        return Mlp([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def params(self):
        """Named parameter arrays, shared (not copied)."""
        out = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"w{i}"] = w
            out[f"b{i}"] = b
        return out


def init_network(layer_sizes, seed=0, dtype=np.float64) -> Mlp:
    """He-initialized network: weights ~ N(0, 2/fan_in), zero biases."""
    if len(layer_sizes) < 2:
        raise ValueError("need at least input and output layer sizes")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        std = np.sqrt(2.0 / fan_in)
        weights.append(rng.normal(0.0, std, size=(fan_in, fan_out)).astype(dtype))
        biases.append(np.zeros(fan_out, dtype=dtype))
    return Mlp(weights, biases)


def forward(net: Mlp, x):
    """Evaluate the network on a single input (d,) or a batch (N, d)."""
    x = np.asarray(x, dtype=net.dtype)
    squeeze = x.ndim == 1
    h = np.atleast_2d(x)
    if h.shape[1] != net.layer_sizes[0]:
        raise ValueError(
            f"input width {h.shape[1]} does not match network input {net.layer_sizes[0]}"
        )
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        h = np.maximum(h @ w + b, 0.0)
    y = h @ net.weights[-1] + net.biases[-1]
    return y[0] if squeeze else y


def input_jacobian(net: Mlp, x):
    """Exact Jacobian d(output)/d(input) at one input, shape (out, in).

    The network is piecewise linear; ReLU units exactly at zero use the
    zero subgradient.
    """
    x = np.asarray(x, dtype=net.dtype)
    if x.ndim != 1 or x.size != net.layer_sizes[0]:
        raise ValueError("input_jacobian expects a single input vector")
    h = x
    jac = None  # (in, width) running product
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        s = h @ w + b
        mask = s > 0
        jac = w * mask if jac is None else (jac @ w) * mask
        h = s * mask
    jac = jac @ net.weights[-1] if jac is not None else net.weights[-1]
    return jac.T


def forward_with_tangent(net: Mlp, x, xdot):
    """Evaluate output and its directional derivative J(x) @ xdot.

    Works on single inputs (d,) or batches (N, d) with per-row tangents.
    Equivalent to a forward-mode sweep: ReLU gates apply to both value
    and tangent.
    """
    x = np.asarray(x, dtype=net.dtype)
    xdot = np.asarray(xdot, dtype=net.dtype)
    squeeze = x.ndim == 1
    h = np.atleast_2d(x)
    t = np.atleast_2d(xdot)
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        s = h @ w + b
        mask = s > 0
        h = s * mask
        t = (t @ w) * mask
    y = h @ net.weights[-1] + net.biases[-1]
    ydot = t @ net.weights[-1]
    return (y[0], ydot[0]) if squeeze else (y, ydot)


@dataclass
class TrainableScalars:
    """Named positive scalars stored in log-space so positivity is structural."""

    log_values: dict

    @classmethod
    def from_natural(cls, values: dict, dtype=np.float64):
        return cls({k: np.asarray(np.log(v), dtype=dtype) for k, v in values.items()})

    def natural(self) -> dict:
        return {k: float(np.exp(v)) for k, v in self.log_values.items()}

    def params(self):
        return {f"log_{k}": v for k, v in self.log_values.items()}

    def copy(self):
        return TrainableScalars({k: v.copy() for k, v in self.log_values.items()})


@dataclass
class AdamState:
    """First/second moment accumulators keyed like the parameter dict."""

    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(params: dict, grads: dict, state: AdamState, lr):
    """One Adam update with bias correction; parameters update in place."""
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for name, p in params.items():
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(f"non-finite gradient for parameter {name!r}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m = state.m[name]
        v = state.v[name]
        m += (1.0 - b1) * (g - m)
        v += (1.0 - b2) * (g * g - v)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return state


# serialization -------------------------------------------------------


def save_model(path, net: Mlp, meta: dict, extra_arrays: dict | None = None):
    """Write a model as a flat npz: named weight arrays + a JSON metadata entry.

    ``meta`` must be JSON-serializable; ``extra_arrays`` (normalization
    statistics, learned scalars, loss history, ...) are stored under their
    own keys.
    """
    arrays = {}
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        arrays[f"w{i}"] = w
        arrays[f"b{i}"] = b
    if extra_arrays:
        arrays.update(extra_arrays)
    meta = dict(meta)
    meta["n_layers"] = len(net.weights)
    arrays["meta_json"] = np.frombuffer(
        json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8
    )
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_model(path):
    """Read back a model file: returns (Mlp, meta dict, extra array dict)."""
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta_json"]).decode("utf-8"))
        n_layers = meta["n_layers"]
        weights = [data[f"w{i}"] for i in range(n_layers)]
        biases = [data[f"b{i}"] for i in range(n_layers)]
        consumed = {f"w{i}" for i in range(n_layers)} | {
            f"b{i}" for i in range(n_layers)
        } | {"meta_json"}
        extra = {k: data[k] for k in data.files if k not in consumed}
    return Mlp(weights, biases), meta, extra


def model_bytes(net: Mlp, meta: dict, extra_arrays: dict | None = None) -> bytes:
    """Serialized model as bytes (for determinism checks)."""
    buf = io.BytesIO()
    arrays = {}
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        arrays[f"w{i}"] = w
        arrays[f"b{i}"] = b
    if extra_arrays:
        arrays.update(extra_arrays)
    meta = dict(meta)
    meta["n_layers"] = len(net.weights)
    arrays["meta_json"] = np.frombuffer(
        json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8
    )
    np.savez(buf, **arrays)
    return buf.getvalue()
