"""Small reverse-mode autodiff over numpy arrays.

Every operation records its parents and a closure that pushes the output
gradient back to them.  ``backward`` walks the recorded graph in reverse
topological order.  All arithmetic is float64.
"""

from __future__ import annotations

import numpy as np

DTYPE = np.float64


class UnsupportedOperation(RuntimeError):
    """Raised when backward reaches a node whose op has no gradient rule."""


class Tensor:
    __slots__ = ("data", "grad", "parents", "op", "_backward", "requires_grad")

    def __init__(self, data, parents=(), op="leaf", backward_fn=None, requires_grad=False):
        self.data = np.asarray(data, dtype=DTYPE)
        self.grad = None
        self.parents = parents
        self.op = op
        self._backward = backward_fn
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(op={self.op}, shape={self.data.shape})"

    def _accumulate(self, g):
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.array(g, dtype=DTYPE, copy=True)
        else:
            self.grad += g

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_tensor(other)))

    def __rsub__(self, other):
        return add(as_tensor(other), neg(self))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return take(self, index)

    def sum(self, axis=None):
        return reduce_sum(self, axis)

    def reshape(self, *shape):
        return reshape(self, shape[0] if len(shape) == 1 else shape)


class Parameter(Tensor):
    """A trainable leaf carrying an Adagrad accumulator."""

    __slots__ = ("name", "accumulator")

    def __init__(self, data, name=""):
        super().__init__(data, requires_grad=True)
        self.name = name
        self.accumulator = np.zeros_like(self.data)

    def zero_grad(self):
        self.grad = None


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data + b.data, (a, b), "add")

    def backward(g):
        a._accumulate(_unbroadcast(g, a.shape))
        b._accumulate(_unbroadcast(g, b.shape))

    out._backward = backward
    return out


def neg(a):
    out = Tensor(-a.data, (a,), "neg")
    out._backward = lambda g: a._accumulate(-g)
    return out


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data * b.data, (a, b), "mul")

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))

    out._backward = backward
    return out


def matmul(a, b):
    """``a @ b`` where ``b`` is 2-D and ``a`` has any leading batch dims."""
    a, b = as_tensor(a), as_tensor(b)
    if b.data.ndim != 2:
        raise ValueError("matmul expects a 2-D right operand")
    out = Tensor(a.data @ b.data, (a, b), "matmul")

    def backward(g):
        if a.requires_grad:
            a._accumulate(g @ b.data.T)
        if b.requires_grad:
            a2 = a.data.reshape(-1, a.data.shape[-1])
            b._accumulate(a2.T @ g.reshape(-1, g.shape[-1]))

    out._backward = backward
    return out


def sigmoid(a):
    # split by sign to stay finite for large |x|
    x = a.data
    s = np.empty_like(x)
    pos = x >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    s[~pos] = ex / (1.0 + ex)
    out = Tensor(s, (a,), "sigmoid")
    out._backward = lambda g: a._accumulate(g * s * (1.0 - s))
    return out


def tanh(a):
    t = np.tanh(a.data)
    out = Tensor(t, (a,), "tanh")
    out._backward = lambda g: a._accumulate(g * (1.0 - t * t))
    return out


def exp(a):
    e = np.exp(a.data)
    out = Tensor(e, (a,), "exp")
    out._backward = lambda g: a._accumulate(g * e)
    return out


def log(a):
    out = Tensor(np.log(a.data), (a,), "log")
    out._backward = lambda g: a._accumulate(g / a.data)
    return out


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), "concat")
    sizes = np.cumsum([t.data.shape[axis] for t in tensors])[:-1]

    def backward(g):
        for t, piece in zip(tensors, np.split(g, sizes, axis=axis)):
            t._accumulate(piece)

    out._backward = backward
    return out


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    out = Tensor(np.stack([t.data for t in tensors], axis=axis), tuple(tensors), "stack")

    def backward(g):
        for i, t in enumerate(tensors):
            t._accumulate(np.take(g, i, axis=axis))

    out._backward = backward
    return out


def _is_fancy(index):
    if not isinstance(index, tuple):
        index = (index,)
    return any(isinstance(i, (np.ndarray, list)) for i in index)


def take(a, index):
    """Basic or advanced indexing (slices, rows of an embedding table, gathers)."""
    out = Tensor(a.data[index], (a,), "slice")
    fancy = _is_fancy(index)

    def backward(g):
        if not a.requires_grad:
            return
        if a.grad is None:
            a.grad = np.zeros_like(a.data)
        if fancy:
            np.add.at(a.grad, index, g)
        else:
            a.grad[index] += g

    out._backward = backward
    return out


def reshape(a, shape):
    out = Tensor(a.data.reshape(shape), (a,), "reshape")
    out._backward = lambda g: a._accumulate(g.reshape(a.data.shape))
    return out


def reduce_sum(a, axis=None):
    out = Tensor(a.data.sum(axis=axis), (a,), "sum")

    def backward(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        a._accumulate(np.broadcast_to(g, a.data.shape))

    out._backward = backward
    return out


def logsumexp(a, axis=-1):
    m = a.data.max(axis=axis, keepdims=True)
    shifted = np.exp(a.data - m)
    total = shifted.sum(axis=axis, keepdims=True)
    value = (m + np.log(total)).squeeze(axis)
    weights = shifted / total
    out = Tensor(value, (a,), "logsumexp")
    out._backward = lambda g: a._accumulate(np.expand_dims(g, axis) * weights)
    return out


def softmax(a, axis=-1):
    shifted = np.exp(a.data - a.data.max(axis=axis, keepdims=True))
    p = shifted / shifted.sum(axis=axis, keepdims=True)
    out = Tensor(p, (a,), "softmax")

    def backward(g):
        a._accumulate(p * (g - (g * p).sum(axis=axis, keepdims=True)))

    out._backward = backward
    return out


def log_softmax(a, axis=-1):
    return a - reshape_keepdims(logsumexp(a, axis), axis)


def reshape_keepdims(a, axis):
    shape = list(a.data.shape)
    shape.insert(axis if axis >= 0 else len(shape) + axis + 1, 1)
    return reshape(a, tuple(shape))


def _topological_order(root):
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))
    return order


def backward(loss):
    """Populate ``.grad`` on every Parameter reachable from the scalar ``loss``."""
    if loss.data.size != 1:
        raise ValueError("backward needs a scalar loss")
    order = _topological_order(loss)
    for node in order:
        if node.parents and node._backward is None:
            raise UnsupportedOperation(f"no gradient rule for op {node.op!r}")
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node.parents and node.grad is not None:
            node._backward(node.grad)
        if not isinstance(node, Parameter):
            node.grad = None
    return {p.name: p.grad for p in order if isinstance(p, Parameter)}
