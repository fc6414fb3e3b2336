"""Minimal reverse-mode automatic differentiation over numpy arrays."""

import numpy as np


class NumericError(Exception):
    pass


def _check_finite(data: np.ndarray, op: str) -> np.ndarray:
    if not np.all(np.isfinite(data)):
        raise NumericError(f"non-finite values produced by {op}")
    return data


class Tensor:
    __slots__ = ("data", "grad", "_parents", "_backward")

    def __init__(self, data, parents=(), backward=None, op="leaf"):
        self.data = _check_finite(np.asarray(data, dtype=np.float64), op)
        self.grad = np.zeros_like(self.data)
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    def backward(self):
        order = []
        seen = set()

        def topo(t):
            if id(t) in seen:
                return
            seen.add(id(t))
            for p in t._parents:
                topo(p)
            order.append(t)

        topo(self)
        self.grad = np.ones_like(self.data)
        for t in reversed(order):
            if t._backward is not None:
                t._backward(t.grad)

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    # -- ops -----------------------------------------------------------

    def __add__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)
        out = Tensor(self.data + other.data, (self, other), op="add")

        def bwd(g):
            self.grad += _unbroadcast(g, self.data.shape)
            other.grad += _unbroadcast(g, other.data.shape)

        out._backward = bwd
        return out

    def __mul__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)
        out = Tensor(self.data * other.data, (self, other), op="mul")

        def bwd(g):
            self.grad += _unbroadcast(g * other.data, self.data.shape)
            other.grad += _unbroadcast(g * self.data, other.data.shape)

        out._backward = bwd
        return out

    def __matmul__(self, other):
        out = Tensor(self.data @ other.data, (self, other), op="matmul")

        def bwd(g):
            self.grad += g @ other.data.T
            other.grad += self.data.T @ g

        out._backward = bwd
        return out

    def relu(self):
        out = Tensor(np.maximum(self.data, 0.0), (self,), op="relu")
        mask = (self.data > 0).astype(np.float64)

        def bwd(g):
            self.grad += g * mask

        out._backward = bwd
        return out

    def tanh(self):
        out = Tensor(np.tanh(self.data), (self,), op="tanh")

        def bwd(g):
            self.grad += g * (1.0 - out.data ** 2)

        out._backward = bwd
        return out

    def rows(self, idx):
        idx = np.asarray(idx, dtype=int)
        out = Tensor(self.data[idx], (self,), op="rows")

        def bwd(g):
            np.add.at(self.grad, idx, g)

        out._backward = bwd
        return out

    def max0(self):
        """Columnwise max over rows -> 1 x k."""
        arg = np.argmax(self.data, axis=0)
        out = Tensor(self.data[arg, np.arange(self.data.shape[1])][None, :],
                     (self,), op="max0")

        def bwd(g):
            self.grad[arg, np.arange(self.data.shape[1])] += g[0]

        out._backward = bwd
        return out

    def mean0(self):
        """Columnwise mean over rows -> 1 x k."""
        n = self.data.shape[0]
        out = Tensor(self.data.mean(axis=0, keepdims=True), (self,), op="mean0")

        def bwd(g):
            self.grad += np.broadcast_to(g / n, self.data.shape)

        out._backward = bwd
        return out

    def sum_squares(self):
        out = Tensor(np.sum(self.data ** 2), (self,), op="sum_squares")

        def bwd(g):
            self.grad += 2.0 * g * self.data

        out._backward = bwd
        return out


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def concat_cols(tensors: list[Tensor]) -> Tensor:
    out = Tensor(np.concatenate([t.data for t in tensors], axis=1),
                 tuple(tensors), op="concat_cols")
    splits = np.cumsum([t.data.shape[1] for t in tensors])[:-1]

    def bwd(g):
        for t, piece in zip(tensors, np.split(g, splits, axis=1)):
            t.grad += piece

    out._backward = bwd
    return out


def cross_entropy(logits: Tensor, label: int) -> Tensor:
    """Softmax cross-entropy for a single 1 x C logit row."""
    z = logits.data[0]
    zmax = z.max()
    logsumexp = zmax + np.log(np.sum(np.exp(z - zmax)))
    out = Tensor(logsumexp - z[label], (logits,), op="cross_entropy")
    probs = np.exp(z - logsumexp)

    def bwd(g):
        grad = probs.copy()
        grad[label] -= 1.0
        logits.grad += g * grad[None, :]

    out._backward = bwd
    return out


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()
