"""Minimal reverse-mode automatic differentiation over numpy arrays.

Define-by-run: each operation returns a node that remembers its inputs and
a closure routing the output gradient back to them. Only the operations
the estimators and losses need are implemented. Everything runs in float64
so central finite differences have enough headroom to validate gradients.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "no_grad",
    "concat",
    "stack",
    "pad2d",
    "softmax",
    "sigmoid",
    "gelu",
    "mean",
]

_GRAD_ENABLED = [True]


class no_grad:
    """Context manager that disables graph construction (forward only)."""

    def __enter__(self):
        self._saved = _GRAD_ENABLED[0]
        _GRAD_ENABLED[0] = False
        return self

    def __exit__(self, *exc):
        _GRAD_ENABLED[0] = self._saved
        return False


class Tensor:
    """An array plus its gradient buffer and backward recipe."""

    __slots__ = ("data", "grad", "_parents", "_backward")
    __array_ufunc__ = None  # keep numpy from hijacking reflected operators

    def __init__(self, data, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        if _GRAD_ENABLED[0]:
            self._parents = _parents
            self._backward = _backward
        else:
            self._parents = ()
            self._backward = None

    # -- introspection frugalities -------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"

    def zero_grad(self):
        self.grad = None

    # -- autodiff core ---------------------------------------------------
    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar output")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack_ = [(self, False)]
        while stack_:
            node, processed = stack_.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack_.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen:
                    stack_.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operators ---------------------------------------------------------
    def __add__(self, other):
        return _add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return _mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return _mul(self, -1.0)

    def __sub__(self, other):
        return _add(self, _neg_of(other))

    def __rsub__(self, other):
        return _add(_neg_of(self), other)

    def __truediv__(self, other):
        return _div(self, other)

    def __rtruediv__(self, other):
        return _div(_wrap(other), self)

    def __pow__(self, exponent):
        return _pow(self, exponent)

    def __matmul__(self, other):
        return _matmul(self, other)

    def __getitem__(self, idx):
        return _getitem(self, idx)

    # -- methods mirroring ndarray spelling ------------------------------
    def sum(self, axis=None, keepdims=False):
        return _sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return _reshape(self, shape)

    def clip(self, lo, hi):
        return _clip(self, lo, hi)

    def exp(self):
        return _exp(self)

    def log(self):
        return _log(self)

    def tanh(self):
        return _tanh(self)

    @property
    def T(self):
        return _transpose(self)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _neg_of(x):
    return _mul(_wrap(x), -1.0)


def _accumulate(t: Tensor, g: np.ndarray):
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    for _ in range(g.ndim - len(shape)):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _add(a, b):
    a, b = _wrap(a), _wrap(b)
    out_data = a.data + b.data

    def bwd(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(g, b.data.shape))

    return Tensor(out_data, (a, b), bwd)


def _mul(a, b):
    a, b = _wrap(a), _wrap(b)
    out_data = a.data * b.data

    def bwd(g):
        _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return Tensor(out_data, (a, b), bwd)


def _div(a, b):
    a, b = _wrap(a), _wrap(b)
    out_data = a.data / b.data

    def bwd(g):
        _accumulate(a, _unbroadcast(g / b.data, a.data.shape))
        _accumulate(b, _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

    return Tensor(out_data, (a, b), bwd)


def _pow(a, exponent):
    a = _wrap(a)
    e = float(exponent)
    out_data = a.data ** e

    def bwd(g):
        _accumulate(a, g * e * a.data ** (e - 1.0))

    return Tensor(out_data, (a,), bwd)


def _exp(a):
    a = _wrap(a)
    out_data = np.exp(a.data)

    def bwd(g):
        _accumulate(a, g * out_data)

    return Tensor(out_data, (a,), bwd)


def _log(a):
    a = _wrap(a)
    out_data = np.log(a.data)

    def bwd(g):
        _accumulate(a, g / a.data)

    return Tensor(out_data, (a,), bwd)


def _tanh(a):
    a = _wrap(a)
    out_data = np.tanh(a.data)

    def bwd(g):
        _accumulate(a, g * (1.0 - out_data * out_data))

    return Tensor(out_data, (a,), bwd)


def _clip(a, lo, hi):
    a = _wrap(a)
    out_data = np.clip(a.data, lo, hi)
    pass_mask = (a.data > lo) & (a.data < hi)

    def bwd(g):
        _accumulate(a, g * pass_mask)

    return Tensor(out_data, (a,), bwd)


def _matmul(a, b):
    """a @ b where a is (..., k) and b is a 2D (k, n) matrix."""
    a, b = _wrap(a), _wrap(b)
    if b.data.ndim != 2:
        raise ValueError("matmul right operand must be 2D")
    out_data = a.data @ b.data

    def bwd(g):
        _accumulate(a, g @ b.data.T)
        contract = tuple(range(a.data.ndim - 1))
        _accumulate(b, np.tensordot(a.data, g, axes=(contract, contract)))

    return Tensor(out_data, (a, b), bwd)


def _transpose(a):
    a = _wrap(a)
    if a.data.ndim != 2:
        raise ValueError("transpose supports 2D tensors")
    out_data = a.data.T

    def bwd(g):
        _accumulate(a, g.T)

    return Tensor(out_data, (a,), bwd)


def _reshape(a, shape):
    a = _wrap(a)
    out_data = a.data.reshape(shape)

    def bwd(g):
        _accumulate(a, g.reshape(a.data.shape))

    return Tensor(out_data, (a,), bwd)


def _sum(a, axis=None, keepdims=False):
    a = _wrap(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        gg = np.asarray(g)
        if axis is not None and not keepdims:
            gg = np.expand_dims(gg, axis)
        _accumulate(a, np.broadcast_to(gg, a.data.shape).copy())

    return Tensor(out_data, (a,), bwd)


def _getitem(a, idx):
    a = _wrap(a)
    out_data = a.data[idx]

    def bwd(g):
        buf = np.zeros_like(a.data)
        np.add.at(buf, idx, g)
        _accumulate(a, buf)

    return Tensor(out_data, (a,), bwd)


def concat(tensors, axis=0):
    tensors = [_wrap(t) for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]

    def bwd(g):
        offset = 0
        for t, size in zip(tensors, sizes):
            index = [slice(None)] * g.ndim
            index[axis] = slice(offset, offset + size)
            _accumulate(t, g[tuple(index)])
            offset += size

    return Tensor(out_data, tuple(tensors), bwd)


def stack(tensors, axis=0):
    tensors = [_wrap(t) for t in tensors]
    out_data = np.stack([t.data for t in tensors], axis=axis)

    def bwd(g):
        parts = np.moveaxis(g, axis, 0)
        for t, part in zip(tensors, parts):
            _accumulate(t, part)

    return Tensor(out_data, tuple(tensors), bwd)


def pad2d(a, pad: int):
    """Zero-pad the first two axes by ``pad`` on every side."""
    a = _wrap(a)
    widths = ((pad, pad), (pad, pad)) + ((0, 0),) * (a.data.ndim - 2)
    out_data = np.pad(a.data, widths)

    def bwd(g):
        index = (slice(pad, g.shape[0] - pad), slice(pad, g.shape[1] - pad))
        _accumulate(a, g[index])

    return Tensor(out_data, (a,), bwd)


def mean(a, axis=None, keepdims=False):
    a = _wrap(a)
    if axis is None:
        count = a.data.size
    elif isinstance(axis, tuple):
        count = int(np.prod([a.data.shape[ax] for ax in axis]))
    else:
        count = a.data.shape[axis]
    return _mul(_sum(a, axis, keepdims), 1.0 / count)


def softmax(a, axis=-1):
    """Numerically stable softmax; -inf entries get exactly zero weight.

    The max shift is treated as a constant, which leaves gradients exact
    because the shift cancels analytically.
    """
    a = _wrap(a)
    shift = np.max(a.data, axis=axis, keepdims=True)
    shift = np.where(np.isfinite(shift), shift, 0.0)
    exped = _exp(_add(a, Tensor(-shift)))
    denom = _sum(exped, axis=axis, keepdims=True)
    return _div(exped, denom)


def sigmoid(a):
    # tanh form avoids exp overflow for large negative inputs
    a = _wrap(a)
    return _mul(_add(_tanh(_mul(a, 0.5)), 1.0), 0.5)


_GELU_C = float(np.sqrt(2.0 / np.pi))


def gelu(a):
    a = _wrap(a)
    inner = _mul(_add(a, _mul(_pow(a, 3.0), 0.044715)), _GELU_C)
    return _mul(_mul(a, _add(_tanh(inner), 1.0)), 0.5)
