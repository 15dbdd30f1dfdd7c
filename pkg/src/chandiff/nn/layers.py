"""Trainable parameters and the dense layer used throughout the models."""

from __future__ import annotations

import itertools
import math

import numpy as np

from .tensor import Tensor, as_tensor, matmul, take

_param_ids = itertools.count()


class Parameter(Tensor):
    """A leaf tensor with a persistent gradient buffer and a unique id."""

    __slots__ = ("pid", "name")

    def __init__(self, data, name=""):
        super().__init__(data, requires_grad=True)
        self.grad = np.zeros_like(self.data)
        self.pid = next(_param_ids)
        self.name = name

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return f"Parameter({self.name or self.pid}, shape={self.shape})"


def dense_forward(w, b, x):
    """Affine map x @ w + b for x of shape (batch, n_in)."""
    x = as_tensor(x)
    if x.ndim != 2 or w.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ValueError(f"dense shape mismatch: x {x.shape}, w {w.shape}")
    if b.shape != (w.shape[1],):
        raise ValueError(f"dense bias shape {b.shape} != ({w.shape[1]},)")
    return matmul(x, w) + b


class Dense:
    """Fully connected layer; weights ~ U[-1/sqrt(n_in), 1/sqrt(n_in)], zero bias."""

    def __init__(self, n_in, n_out, rng, name="dense"):
        bound = 1.0 / math.sqrt(n_in)
        self.w = Parameter(rng.uniform(-bound, bound, size=(n_in, n_out)), name=f"{name}.w")
        self.b = Parameter(np.zeros(n_out), name=f"{name}.b")

    def __call__(self, x):
        return dense_forward(self.w, self.b, x)

    def params(self):
        return [self.w, self.b]


class Embedding:
    """Lookup table of shape (n_rows, width), one row per index."""

    def __init__(self, n_rows, width, name="embed", init=1.0):
        self.table = Parameter(np.full((n_rows, width), float(init)), name=name)

    def __call__(self, idx):
        return take(self.table, np.asarray(idx, dtype=np.intp), axis=0)

    def params(self):
        return [self.table]
