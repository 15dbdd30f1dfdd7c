"""Conditional denoising network.

A two-hidden-layer MLP over the concatenated noisy block and condition,
with per-step learned embedding vectors gating each hidden layer:

    h1 = softplus(Dense(concat(x_t, c)) o E1[t])
    h2 = softplus(Dense(h1) o E2[t])
    out = Dense(h2)                       # width n, linear

The embedding tables have one row per diffusion step and start at all
ones, so an untrained network is step-independent.
"""

from __future__ import annotations

import numpy as np

from .. import nn


class DenoiserNet:
    """MLP denoiser predicting a length-n target (noise or velocity)."""

    def __init__(self, n, T, n_hidden, rng_init):
        if n < 1 or T < 1 or n_hidden < 1:
            raise ValueError("n, T and n_hidden must be >= 1")
        self.n = int(n)
        self.T = int(T)
        self.n_hidden = int(n_hidden)
        self.dense_in = nn.Dense(2 * n, n_hidden, rng_init, name="dense_in")
        self.embed1 = nn.Embedding(T, n_hidden, name="embed1")
        self.dense_h = nn.Dense(n_hidden, n_hidden, rng_init, name="dense_h")
        self.embed2 = nn.Embedding(T, n_hidden, name="embed2")
        self.dense_out = nn.Dense(n_hidden, n, rng_init, name="dense_out")

    def __call__(self, x_t, t, c):
        """Evaluate at step t (a scalar or per-row int array in 1..T)."""
        x_t = nn.as_tensor(x_t)
        c = nn.as_tensor(c)
        if x_t.shape != c.shape or x_t.ndim != 2 or x_t.shape[1] != self.n:
            raise ValueError(f"expected (batch, {self.n}) inputs, got {x_t.shape} and {c.shape}")
        idx = np.asarray(t, dtype=np.intp)
        if np.any(idx < 1) or np.any(idx > self.T):
            raise ValueError(f"t must lie in [1, {self.T}]")
        idx = idx - 1
        if idx.ndim == 0:
            idx = np.full(x_t.shape[0], int(idx), dtype=np.intp)

        h = nn.softplus(self.dense_in(nn.concat([x_t, c], axis=1)) * self.embed1(idx))
        h = nn.softplus(self.dense_h(h) * self.embed2(idx))
        return self.dense_out(h)

    def params(self):
        return (
            self.dense_in.params()
            + self.embed1.params()
            + self.dense_h.params()
            + self.embed2.params()
            + self.dense_out.params()
        )

    def named_params(self):
        return {
            "dense_in.w": self.dense_in.w,
            "dense_in.b": self.dense_in.b,
            "embed1": self.embed1.table,
            "dense_h.w": self.dense_h.w,
            "dense_h.b": self.dense_h.b,
            "embed2": self.embed2.table,
            "dense_out.w": self.dense_out.w,
            "dense_out.b": self.dense_out.b,
        }
