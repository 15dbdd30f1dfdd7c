"""Training loop for the conditional denoiser."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import nn
from ..errors import TrainingDiverged
from .sampling import check_mode, forward_sample, velocity_target


@dataclass(frozen=True)
class DmTrainConfig:
    epochs: int = 10
    batch_size: int = 100
    lr: float = 1e-3
    optimizer: str = "adam"

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be > 0")


def loss_conditional(net, sched, mode, x0, c, rng):
    """Simplified denoising loss on one batch.

    Draws t ~ U{1..T} and eps ~ N(0, I) independently per row, forms
    x_t by the closed-form forward process, and returns the batch-mean
    squared error  E || pred(x_t, t, c) - target ||^2  where the target is
    eps (epsilon mode) or the velocity v (v mode).
    """
    check_mode(mode)
    x0 = np.asarray(x0)
    c = np.asarray(c)
    if x0.ndim != 2 or x0.shape != c.shape:
        raise ValueError("x0 and c must be (batch, n) with equal shapes")
    batch = x0.shape[0]
    t = rng.integers(1, sched.T + 1, size=batch)
    eps = rng.standard_normal(x0.shape)
    x_t = forward_sample(sched, x0, t, eps)
    target = eps if mode == "epsilon" else velocity_target(sched, x0, eps, t)
    diff = net(x_t, t, c) - nn.Tensor(target)
    return nn.tsum(diff * diff) * (1.0 / batch)


def train_dm(net, sched, mode, x0, c, cfg, rng, *, callback=None):
    """Minibatch-train the denoiser on (x0, c) pairs; returns per-epoch
    mean losses.  Raises TrainingDiverged as soon as a batch loss is
    non-finite."""
    x0 = np.asarray(x0)
    c = np.asarray(c)
    if x0.ndim != 2 or x0.shape != c.shape:
        raise ValueError("x0 and c must be (batch, n) with equal shapes")
    opt = nn.make_optimizer(cfg.optimizer, net.params(), cfg.lr)
    shuffle_rng = rng.stream("shuffle")
    draw_rng = rng.stream("draws")
    n_rows = x0.shape[0]
    history = []
    for epoch in range(cfg.epochs):
        perm = shuffle_rng.permutation(n_rows)
        total = 0.0
        n_batches = 0
        for lo in range(0, n_rows, cfg.batch_size):
            idx = perm[lo : lo + cfg.batch_size]
            loss = loss_conditional(net, sched, mode, x0[idx], c[idx], draw_rng)
            val = loss.item()
            if not np.isfinite(val):
                raise TrainingDiverged(
                    f"denoiser loss non-finite at epoch {epoch + 1}, batch {n_batches + 1}: {val!r}"
                )
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += val
            n_batches += 1
        history.append(total / n_batches)
        if callback is not None:
            callback(epoch, history[-1])
    return history
