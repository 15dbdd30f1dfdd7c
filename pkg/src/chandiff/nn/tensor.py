"""Tape-based reverse-mode automatic differentiation on numpy arrays.

Every operation on ``Tensor`` records its inputs and a backward closure on
the result node, so each forward pass rebuilds the graph from scratch.
Calling ``backward()`` on a scalar loss walks the graph in reverse
topological order and accumulates gradients into every tensor that requires
them.  Gradients keep accumulating across backward calls until explicitly
zeroed.

Float32 is the working precision.  ``use_dtype(np.float64)`` switches newly
created tensors to float64, which the gradient-check tests use to push
finite-difference agreement below 1e-5.
"""

from __future__ import annotations

import contextlib

import numpy as np

_DEFAULT_DTYPE = np.float32
_GRAD_ENABLED = True


def default_dtype():
    """Dtype given to tensors created from non-float data."""
    return _DEFAULT_DTYPE


@contextlib.contextmanager
def use_dtype(dtype):
    """Temporarily change the default tensor dtype (float32 or float64)."""
    global _DEFAULT_DTYPE
    dtype = np.dtype(dtype).type
    if dtype not in (np.float32, np.float64):
        raise ValueError("default dtype must be float32 or float64")
    prev = _DEFAULT_DTYPE
    _DEFAULT_DTYPE = dtype
    try:
        yield
    finally:
        _DEFAULT_DTYPE = prev


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (pure inference)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def grad_enabled():
    return _GRAD_ENABLED


def _unbroadcast(grad, shape):
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] > 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    """A numpy array plus an optional gradient and tape node.

    Tensors produced by ops are treated as immutable; parameters are the
    only leaves an optimizer mutates in place.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data)
        if arr.dtype != _DEFAULT_DTYPE:
            arr = arr.astype(_DEFAULT_DTYPE)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    # -- introspection ----------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def detach(self):
        """A view of the same values cut off from the tape."""
        return Tensor(self.data)

    def assert_finite(self, name="tensor"):
        if not np.all(np.isfinite(self.data)):
            raise FloatingPointError(f"{name} contains NaN or Inf")
        return self

    # -- graph plumbing ----------------------------------------------------

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += _unbroadcast(g, self.data.shape).astype(self.data.dtype, copy=False)

    def backward(self):
        """Backpropagate from a scalar; accumulates into ``.grad`` fields."""
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar loss")
        order = []
        state = {}  # id -> 1 while on stack, 2 when done
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                state[id(node)] = 2
                order.append(node)
                continue
            mark = state.get(id(node))
            if mark == 2:
                continue
            if mark == 1:
                raise RuntimeError("cycle detected in autodiff graph")
            state[id(node)] = 1
            stack.append((node, True))
            for p in node._parents:
                if state.get(id(p)) != 2:
                    stack.append((p, False))
        self._accumulate(np.ones_like(self.data))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operators ----------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(as_tensor(other), -1.0))

    def __rsub__(self, other):
        return add(as_tensor(other), mul(self, -1.0))

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return mul(self, power(other, -1.0))
        return mul(self, 1.0 / float(other))

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, p):
        return power(self, p)

    def sum(self):
        return tsum(self)

    def mean(self):
        return tmean(self)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward):
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


# -- arithmetic --------------------------------------------------------------


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            b._accumulate(g)

    return _make(out_data, (a, b), backward)


def mul(a, b):
    a = as_tensor(a)
    if not isinstance(b, Tensor) and np.isscalar(b):
        s = float(b)

        def backward_scalar(g):
            a._accumulate(g * s)

        return _make(a.data * s, (a,), backward_scalar)
    b = as_tensor(b)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * b.data)
        if b.requires_grad:
            b._accumulate(g * a.data)

    return _make(a.data * b.data, (a, b), backward)


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")

    def backward(g):
        if a.requires_grad:
            a._accumulate(g @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ g)

    return _make(a.data @ b.data, (a, b), backward)


def power(a, p):
    """Elementwise a**p for a python-float exponent."""
    a = as_tensor(a)
    p = float(p)
    out_data = a.data**p

    def backward(g):
        a._accumulate(g * p * a.data ** (p - 1.0))

    return _make(out_data, (a,), backward)


def sqrt(a):
    return power(a, 0.5)


def tsum(a):
    a = as_tensor(a)

    def backward(g):
        a._accumulate(np.broadcast_to(g, a.data.shape))

    return _make(a.data.sum(), (a,), backward)


def tmean(a):
    a = as_tensor(a)
    n = a.data.size

    def backward(g):
        a._accumulate(np.broadcast_to(g / n, a.data.shape))

    return _make(a.data.mean(), (a,), backward)


# -- structure ----------------------------------------------------------------


def concat(tensors, axis=1):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                t._accumulate(g[tuple(sl)])

    return _make(np.concatenate([t.data for t in tensors], axis=axis), tensors, backward)


def take(a, idx, axis=0):
    """Gather rows (axis 0) or columns (axis 1) by an integer index array.

    Repeated indices are allowed; their gradient contributions add.
    """
    a = as_tensor(a)
    idx = np.asarray(idx, dtype=np.intp)
    out_data = np.take(a.data, idx, axis=axis)

    def backward(g):
        ga = np.zeros_like(a.data)
        if axis == 0:
            np.add.at(ga, idx, g)
        else:
            np.add.at(ga.T, idx, np.moveaxis(g, axis, 0))
        a._accumulate(ga)

    return _make(out_data, (a,), backward)


def pick(a, idx):
    """out[i] = a[i, idx[i]] for a 2-d tensor; returns shape (batch,)."""
    a = as_tensor(a)
    idx = np.asarray(idx, dtype=np.intp)
    rows = np.arange(a.shape[0])

    def backward(g):
        ga = np.zeros_like(a.data)
        np.add.at(ga, (rows, idx), g)
        a._accumulate(ga)

    return _make(a.data[rows, idx], (a,), backward)


# -- nonlinearities -----------------------------------------------------------


def relu(a):
    a = as_tensor(a)
    mask = a.data > 0

    def backward(g):
        a._accumulate(g * mask)

    return _make(np.where(mask, a.data, 0.0), (a,), backward)


def elu(a):
    a = as_tensor(a)
    neg = np.expm1(np.minimum(a.data, 0.0))
    out_data = np.where(a.data > 0, a.data, neg)

    def backward(g):
        a._accumulate(g * np.where(a.data > 0, 1.0, neg + 1.0))

    return _make(out_data, (a,), backward)


def softplus(a):
    """log(1 + e^x) computed without overflow for large |x|."""
    a = as_tensor(a)
    out_data = np.maximum(a.data, 0.0) + np.log1p(np.exp(-np.abs(a.data)))

    def backward(g):
        # d/dx softplus = sigmoid(x), evaluated overflow-safe as well
        z = np.exp(-np.abs(a.data))
        sig = np.where(a.data >= 0, 1.0 / (1.0 + z), z / (1.0 + z))
        a._accumulate(g * sig)

    return _make(out_data, (a,), backward)


_ACTIVATIONS = {"relu": relu, "elu": elu, "softplus": softplus}


def activation(kind, x):
    """Apply an activation by name ('relu', 'elu', 'softplus')."""
    try:
        fn = _ACTIVATIONS[kind]
    except KeyError:
        raise ValueError(f"unknown activation kind: {kind!r}") from None
    return fn(x)


def logsumexp(a):
    """Row-wise log-sum-exp of a 2-d tensor, stabilized by the row max."""
    a = as_tensor(a)
    m = a.data.max(axis=1, keepdims=True)
    ex = np.exp(a.data - m)
    s = ex.sum(axis=1, keepdims=True)
    out_data = (m + np.log(s))[:, 0]

    def backward(g):
        a._accumulate(g[:, None] * (ex / s))

    return _make(out_data, (a,), backward)
