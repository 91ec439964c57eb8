"""Reverse-mode differentiation over numpy arrays.

Operations executed while a :class:`Tape` is active, and that touch at least
one tensor requiring gradients, are appended to the tape in execution order.
Because creation order is already a topological order, ``Tape.backward``
simply walks the tape in reverse. Outside a tape nothing is recorded, so
inference carries no bookkeeping overhead.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from ..errors import UsageError

_TAPES: list["Tape"] = []


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name", "__weakref__")
    __array_priority__ = 100.0

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._backward = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def __len__(self) -> int:
        return len(self.data)

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag})"

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    # operator sugar
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
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, p: float):
        return power(self, p)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return reshape(self, shape)


class Tape:
    """Records differentiable operations executed inside ``with tape:``."""

    def __init__(self):
        self.nodes: list[Tensor] = []
        self._ids: set[int] = set()

    def __enter__(self) -> "Tape":
        _TAPES.append(self)
        return self

    def __exit__(self, *exc):
        _TAPES.remove(self)
        return False

    def record(self, t: Tensor) -> None:
        self.nodes.append(t)
        self._ids.add(id(t))

    def backward(self, loss: Tensor, store=None) -> dict[int, np.ndarray]:
        """Accumulate d(loss)/d(leaf) into ``.grad`` of every leaf requiring gradients.

        Gradient buffers start from zero on every call. When ``store`` is
        given, every parameter in it receives a gradient, zero if unused.
        """
        if not isinstance(loss, Tensor) or id(loss) not in self._ids:
            raise UsageError("backward() needs a loss produced by a forward pass recorded on this tape")
        if loss.data.size != 1:
            raise UsageError("backward() needs a scalar loss")
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        leaves: dict[int, Tensor] = {}
        start = self.nodes.index(loss)
        for node in reversed(self.nodes[: start + 1]):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if parent._backward is None:
                    leaves[key] = parent
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
        if store is not None:
            for p in store.parameters():
                p.grad = np.zeros_like(p.data)
        for key, leaf in leaves.items():
            leaf.grad = grads[key].reshape(leaf.shape)
        self.nodes.clear()
        self._ids.clear()
        return {k: leaf.grad for k, leaf in leaves.items()}


def recording() -> bool:
    return bool(_TAPES)


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: tuple, backward) -> Tensor:
    out = Tensor(data)
    if _TAPES and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
        _TAPES[-1].record(out)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# elementwise -------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    return _make(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    return _make(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    return _make(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def div(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    out = a.data / b.data
    return _make(out, (a, b),
                 lambda g: (_unbroadcast(g / b.data, a.shape),
                            _unbroadcast(-g * out / b.data, b.shape)))


def power(a: Tensor, p: float) -> Tensor:
    a = _lift(a)
    return _make(a.data ** p, (a,), lambda g: (g * p * a.data ** (p - 1),))


def sqrt(a: Tensor) -> Tensor:
    """Square root whose derivative at 0 is taken to be 0 (norms of zero vectors)."""
    a = _lift(a)
    out = np.sqrt(np.maximum(a.data, 0.0))

    def back(g):
        safe = np.where(out > 0, out, 1.0)
        return (np.where(out > 0, 0.5 * g / safe, 0.0),)

    return _make(out, (a,), back)


def tabs(a: Tensor) -> Tensor:
    a = _lift(a)
    return _make(np.abs(a.data), (a,), lambda g: (g * np.sign(a.data),))


def exp(a: Tensor) -> Tensor:
    a = _lift(a)
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return expit(x)


def sigmoid(a: Tensor) -> Tensor:
    a = _lift(a)
    s = _sigmoid(a.data)
    return _make(s, (a,), lambda g: (g * s * (1.0 - s),))


def swish(a: Tensor) -> Tensor:
    a = _lift(a)
    s = _sigmoid(a.data)
    return _make(a.data * s, (a,), lambda g: (g * (s + a.data * s * (1.0 - s)),))


def cos(a: Tensor) -> Tensor:
    a = _lift(a)
    return _make(np.cos(a.data), (a,), lambda g: (-g * np.sin(a.data),))


def sin(a: Tensor) -> Tensor:
    a = _lift(a)
    return _make(np.sin(a.data), (a,), lambda g: (g * np.cos(a.data),))


def arccos(a: Tensor) -> Tensor:
    """arccos on the input clipped to [-1, 1]; clipped entries get zero gradient."""
    a = _lift(a)
    x = np.clip(a.data, -1.0, 1.0)

    def back(g):
        inside = np.abs(a.data) < 1.0
        denom = np.sqrt(np.where(inside, 1.0 - x * x, 1.0))
        return (np.where(inside, -g / denom, 0.0),)

    return _make(np.arccos(x), (a,), back)


# linear algebra and reductions --------------------------------------------

def matmul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    return _make(a.data @ b.data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


def linear(x, W, b=None) -> Tensor:
    out = matmul(x, W)
    return out if b is None else add(out, b)


def _expand_reduced(g: np.ndarray, shape: tuple, axis, keepdims: bool) -> np.ndarray:
    if axis is None:
        return np.broadcast_to(g, shape)
    if not keepdims:
        axes = (axis,) if isinstance(axis, int) else axis
        axes = tuple(ax % len(shape) for ax in axes)
        g = np.expand_dims(g, axes)
    return np.broadcast_to(g, shape)


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    a = _lift(a)
    return _make(a.data.sum(axis=axis, keepdims=keepdims), (a,),
                 lambda g: (_expand_reduced(g, a.shape, axis, keepdims).copy(),))


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    a = _lift(a)
    out = a.data.mean(axis=axis, keepdims=keepdims)
    count = a.data.size / max(out.size, 1)
    return _make(out, (a,),
                 lambda g: (_expand_reduced(g / count, a.shape, axis, keepdims).copy(),))


def reshape(a: Tensor, shape) -> Tensor:
    a = _lift(a)
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def concat(tensors, axis: int = -1) -> Tensor:
    tensors = [_lift(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    bounds = np.cumsum([0] + [t.shape[axis] for t in tensors])

    def back(g):
        return tuple(np.take(g, np.arange(lo, hi), axis=axis) for lo, hi in zip(bounds[:-1], bounds[1:]))

    return _make(data, tuple(tensors), back)


def stack(tensors, axis: int = 0) -> Tensor:
    tensors = [_lift(t) for t in tensors]
    data = np.stack([t.data for t in tensors], axis=axis)

    def back(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return _make(data, tuple(tensors), back)


def getitem(a: Tensor, idx) -> Tensor:
    a = _lift(a)

    def back(g):
        out = np.zeros_like(a.data)
        np.add.at(out, idx, g)
        return (out,)

    return _make(a.data[idx], (a,), back)


def _scatter_matrix(index: np.ndarray, num_rows: int) -> sp.csr_matrix:
    m = len(index)
    return sp.csr_matrix((np.ones(m), (index, np.arange(m))), shape=(num_rows, m))


def take_rows(a: Tensor, index) -> Tensor:
    """``a[index]`` for an integer array of any shape; rows of ``a`` are gathered."""
    a = _lift(a)
    index = np.asarray(index, dtype=np.int64)

    def back(g):
        flat = index.ravel()
        rows = g.reshape(flat.size, -1)
        out = _scatter_matrix(flat, a.shape[0]) @ rows
        return (np.asarray(out).reshape(a.shape),)

    return _make(a.data[index], (a,), back)


def segment_sum(values: Tensor, index, num_segments: int) -> Tensor:
    """out[s] = sum of values[i] over i with index[i] == s (fixed summation order)."""
    values = _lift(values)
    index = np.asarray(index, dtype=np.int64)
    if len(index) == 0:
        return _make(np.zeros((num_segments,) + values.shape[1:]), (values,),
                     lambda g: (np.zeros_like(values.data),))
    flat = values.data.reshape(len(index), -1)
    out = np.asarray(_scatter_matrix(index, num_segments) @ flat)
    return _make(out.reshape((num_segments,) + values.shape[1:]), (values,),
                 lambda g: (g[index],))


def batch_norm(x: Tensor, gamma: Tensor, beta: Tensor, running_mean: np.ndarray,
               running_var: np.ndarray, train: bool, momentum: float = 0.1,
               eps: float = 1e-5) -> Tensor:
    """Per-feature batch normalisation over rows; updates running stats in place when training."""
    x = _lift(x)
    if train and x.shape[0] > 1:
        mu = x.data.mean(axis=0)
        var = x.data.var(axis=0)
        n = x.shape[0]
        running_mean *= 1.0 - momentum
        running_mean += momentum * mu
        running_var *= 1.0 - momentum
        running_var += momentum * var * n / (n - 1)
        inv = 1.0 / np.sqrt(var + eps)
        xhat = (x.data - mu) * inv

        def back(g):
            gxhat = g * gamma.data
            gx = inv * (gxhat - gxhat.mean(axis=0) - xhat * (gxhat * xhat).mean(axis=0))
            return gx, (g * xhat).sum(axis=0), g.sum(axis=0)
    else:
        inv = 1.0 / np.sqrt(running_var + eps)
        xhat = (x.data - running_mean) * inv

        def back(g):
            return g * gamma.data * inv, (g * xhat).sum(axis=0), g.sum(axis=0)

    return _make(xhat * gamma.data + beta.data, (x, gamma, beta), back)
