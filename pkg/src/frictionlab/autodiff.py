"""Reverse-mode automatic differentiation over numpy arrays.

A small tape: each operation records its parents and a vector-Jacobian
product closure. Gradients only flow into nodes marked as requiring them,
so constants (data batches) cost nothing on the backward pass. The
primitive set covers feed-forward ReLU networks and the friction-model
algebra used by the training losses, including losses built from
input-Jacobian-vector products (the ReLU gate masks are piecewise constant,
so treating them as constants gives exact gradients almost everywhere).
"""

from __future__ import annotations

import numpy as np


class Var:
    """Node in the computation graph."""

    __slots__ = ("value", "parents", "grad", "needs_grad", "name")

    def __init__(self, value, parents=(), needs_grad=False, name=""):
        self.value = np.asarray(value)
        self.parents = parents  # tuple of (Var, vjp) pairs, grad-needing parents only
        self.grad = None
        self.needs_grad = needs_grad
        self.name = name

    def __repr__(self):
        return f"Var(shape={self.value.shape}, needs_grad={self.needs_grad}, name={self.name!r})"

    # operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


def param(value, name=""):
    """A leaf that accumulates gradients."""
    return Var(value, needs_grad=True, name=name)


def constant(value, name=""):
    """A leaf that does not (data, masks, fixed coefficients)."""
    return Var(value, needs_grad=False, name=name)


def _as_var(x, like=None):
    """Wrap a raw value as a constant, matching the dtype of ``like`` for
    python/0-d scalars so mixed graphs do not silently promote to float64."""
    if isinstance(x, Var):
        return x
    x = np.asarray(x)
    if like is not None and x.ndim == 0 and x.dtype != like.value.dtype:
        x = x.astype(like.value.dtype)
    return constant(x)


def _unbroadcast(grad, shape):
    """Sum a broadcast gradient back down to the parent's shape."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _node(value, pairs):
    parents = tuple((p, vjp) for p, vjp in pairs if p.needs_grad)
    return Var(value, parents=parents, needs_grad=bool(parents))


# primitives ---------------------------------------------------------


def add(a, b):
    a = _as_var(a, like=b if isinstance(b, Var) else None)
    b = _as_var(b, like=a)
    return _node(
        a.value + b.value,
        [
            (a, lambda g: _unbroadcast(g, a.value.shape)),
            (b, lambda g: _unbroadcast(g, b.value.shape)),
        ],
    )


def sub(a, b):
    a = _as_var(a, like=b if isinstance(b, Var) else None)
    b = _as_var(b, like=a)
    return _node(
        a.value - b.value,
        [
            (a, lambda g: _unbroadcast(g, a.value.shape)),
            (b, lambda g: _unbroadcast(-g, b.value.shape)),
        ],
    )


def mul(a, b):
    a = _as_var(a, like=b if isinstance(b, Var) else None)
    b = _as_var(b, like=a)
    return _node(
        a.value * b.value,
        [
            (a, lambda g: _unbroadcast(g * b.value, a.value.shape)),
            (b, lambda g: _unbroadcast(g * a.value, b.value.shape)),
        ],
    )


def div(a, b):
    a = _as_var(a, like=b if isinstance(b, Var) else None)
    b = _as_var(b, like=a)
    inv = 1.0 / b.value
    return _node(
        a.value / b.value,
        [
            (a, lambda g: _unbroadcast(g * inv, a.value.shape)),
            (b, lambda g: _unbroadcast(-g * a.value * inv * inv, b.value.shape)),
        ],
    )


def neg(a):
    a = _as_var(a)
    return _node(-a.value, [(a, lambda g: -g)])


def matmul(a, b):
    a, b = _as_var(a), _as_var(b)
    return _node(
        a.value @ b.value,
        [
            (a, lambda g: g @ b.value.T),
            (b, lambda g: a.value.T @ g),
        ],
    )


def relu(a):
    a = _as_var(a)
    mask = a.value > 0  # derivative 0 at exactly 0
    return _node(a.value * mask, [(a, lambda g: g * mask)])


def exp(a):
    a = _as_var(a)
    out = np.exp(a.value)
    return _node(out, [(a, lambda g: g * out)])


def absolute(a):
    a = _as_var(a)
    sign = np.sign(a.value)  # subgradient 0 at 0
    return _node(np.abs(a.value), [(a, lambda g: g * sign)])


def square(a):
    a = _as_var(a)
    return _node(a.value**2, [(a, lambda g: g * (2.0 * a.value))])


def clip_max(a, limit):
    """Elementwise min(a, limit); gradient passes only where a < limit."""
    a = _as_var(a)
    limit = a.value.dtype.type(limit)
    mask = a.value < limit
    return _node(np.where(mask, a.value, limit), [(a, lambda g: g * mask)])


def mean(a):
    a = _as_var(a)
    n = a.value.size
    return _node(
        np.asarray(a.value.mean()),
        [(a, lambda g: np.broadcast_to(g / n, a.value.shape).copy())],
    )


def total(a):
    a = _as_var(a)
    return _node(
        np.asarray(a.value.sum()),
        [(a, lambda g: np.broadcast_to(g, a.value.shape).copy())],
    )


# backward pass ------------------------------------------------------


def backward(root: Var):
    """Accumulate gradients of a scalar root into every grad-needing leaf."""
    if root.value.size != 1:
        raise ValueError("backward expects a scalar root")
    order = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent, _ in node.parents:
            if id(parent) not in visited:
                stack.append((parent, False))

    root.grad = np.ones_like(root.value)
    for node in reversed(order):
        if node.grad is None:
            continue
        g = node.grad
        for parent, vjp in node.parents:
            contrib = vjp(g)
            if parent.grad is None:
                parent.grad = contrib
            else:
                parent.grad = parent.grad + contrib


def zero_grads(nodes):
    for node in nodes:
        node.grad = None
