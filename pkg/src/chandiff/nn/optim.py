"""First-order optimizers over Parameter lists.

All of them read accumulated gradients and update parameter values in
place; they never clear gradients themselves, so callers pair each step
with ``zero_grad()``.
"""

from __future__ import annotations

import numpy as np


class Optimizer:
    def __init__(self, params, lr):
        self.params = list(params)
        if not self.params:
            raise ValueError("optimizer needs at least one parameter")
        self.lr = float(lr)
        self.t = 0
        self.state = {}

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def _slot(self, p):
        st = self.state.get(p.pid)
        if st is None:
            st = self._init_state(p)
            self.state[p.pid] = st
        if st[0].shape != p.data.shape:
            raise ValueError(f"optimizer state shape mismatch for {p!r}")
        return st

    def step(self):
        self.t += 1
        for p in self.params:
            if p.grad is None:
                raise ValueError(f"parameter {p!r} has no gradient")
            self._update(p, p.grad, self._slot(p))


class Adam(Optimizer):
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        super().__init__(params, lr)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps

    def _init_state(self, p):
        return (np.zeros_like(p.data), np.zeros_like(p.data))

    def _update(self, p, g, st):
        m, v = st
        m += (1 - self.beta1) * (g - m)
        v += (1 - self.beta2) * (g * g - v)
        mh = m / (1 - self.beta1**self.t)
        vh = v / (1 - self.beta2**self.t)
        p.data -= (self.lr * mh / (np.sqrt(vh) + self.eps)).astype(p.data.dtype, copy=False)


class NAdam(Adam):
    """Adam with a Nesterov-style lookahead on the first moment."""

    def _update(self, p, g, st):
        m, v = st
        m += (1 - self.beta1) * (g - m)
        v += (1 - self.beta2) * (g * g - v)
        mh = m / (1 - self.beta1**self.t)
        vh = v / (1 - self.beta2**self.t)
        lookahead = self.beta1 * mh + (1 - self.beta1) * g / (1 - self.beta1**self.t)
        p.data -= (self.lr * lookahead / (np.sqrt(vh) + self.eps)).astype(p.data.dtype, copy=False)


class RMSprop(Optimizer):
    def __init__(self, params, lr=1e-3, decay=0.99, eps=1e-8):
        super().__init__(params, lr)
        self.decay, self.eps = decay, eps

    def _init_state(self, p):
        return (np.zeros_like(p.data),)

    def _update(self, p, g, st):
        (v,) = st
        v += (1 - self.decay) * (g * g - v)
        p.data -= (self.lr * g / (np.sqrt(v) + self.eps)).astype(p.data.dtype, copy=False)


_KINDS = {"adam": Adam, "nadam": NAdam, "rmsprop": RMSprop}


def make_optimizer(kind, params, lr):
    try:
        cls = _KINDS[kind.lower()]
    except KeyError:
        raise ValueError(f"unknown optimizer kind: {kind!r}") from None
    return cls(params, lr=lr)
