"""End-to-end coded modulation with a learned or generated channel.

The transmitter maps a one-hot message through Dense(M) + ELU and a linear
Dense(n), then scales the batch so the average block power is exactly n
(unit power per real dimension).  The receiver maps the channel output
through Dense(M) + ELU, Dense(M) + ELU and a linear Dense(M) score head;
classification takes the argmax (lowest index on ties).

Training algorithms
-------------------
model-aware   backpropagate through the differentiable true channel
pretrain      backpropagate through a frozen pretrained diffusion model
iterative     alternate: fine-tune the diffusion model on pairs produced
              by the current encoder, then train the autoencoder through it

Symbol error rates are always measured against the true channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .channels import apply_channel, apply_channel_diff, block_len, ebn0_to_sigma, with_noise_std
from .diffusion import DmTrainConfig, train_dm
from .errors import TrainingDiverged

ALGORITHMS = ("model-aware", "pretrain", "iterative")

_POWER_TOL = 1e-5
_EVAL_CHUNK = 1 << 17


def one_hot(m, m_count):
    m = np.asarray(m, dtype=np.intp)
    if np.any(m < 0) or np.any(m >= m_count):
        raise ValueError(f"messages must lie in [0, {m_count})")
    out = np.zeros((m.size, m_count))
    out[np.arange(m.size), m] = 1.0
    return out


class AutoencoderPair:
    """Encoder/decoder MLPs for M messages over n real channel uses."""

    def __init__(self, m_count, n, rng_init):
        if m_count < 2 or n < 1:
            raise ValueError("need m_count >= 2 and n >= 1")
        self.m_count = int(m_count)
        self.n = int(n)
        self.enc1 = nn.Dense(m_count, m_count, rng_init, name="enc1")
        self.enc2 = nn.Dense(m_count, n, rng_init, name="enc2")
        self.dec1 = nn.Dense(n, m_count, rng_init, name="dec1")
        self.dec2 = nn.Dense(m_count, m_count, rng_init, name="dec2")
        self.dec3 = nn.Dense(m_count, m_count, rng_init, name="dec3")

    def encode(self, m):
        """Map message indices to power-normalized blocks (batch, n)."""
        h = nn.elu(self.enc1(nn.Tensor(one_hot(m, self.m_count))))
        x = self.enc2(h)
        sumsq = nn.tsum(x * x)
        if sumsq.item() == 0.0:
            raise ValueError("zero batch power before normalization")
        scale = nn.power(sumsq * (1.0 / (self.n * x.shape[0])), -0.5)
        out = x * scale
        power = float(np.sum(out.data**2)) / x.shape[0]
        if abs(power - self.n) > _POWER_TOL * self.n:
            raise AssertionError(f"batch power {power} deviates from {self.n}")
        return out

    def decode(self, y):
        """Map channel outputs to score rows (batch, M)."""
        y = nn.as_tensor(y)
        if y.ndim != 2 or y.shape[1] != self.n:
            raise ValueError(f"expected (batch, {self.n}) channel outputs")
        if not np.all(np.isfinite(y.data)):
            raise ValueError("channel output contains NaN or Inf")
        h = nn.elu(self.dec1(y))
        h = nn.elu(self.dec2(h))
        return self.dec3(h)

    def encoder_params(self):
        return self.enc1.params() + self.enc2.params()

    def decoder_params(self):
        return self.dec1.params() + self.dec2.params() + self.dec3.params()

    def params(self):
        return self.encoder_params() + self.decoder_params()

    def named_params(self):
        out = {}
        for tag, layer in (
            ("enc1", self.enc1), ("enc2", self.enc2),
            ("dec1", self.dec1), ("dec2", self.dec2), ("dec3", self.dec3),
        ):
            out[f"{tag}.w"] = layer.w
            out[f"{tag}.b"] = layer.b
        return out

    def codebook(self):
        """All M codewords, normalized over the uniform message batch."""
        with nn.no_grad():
            return self.encode(np.arange(self.m_count)).data.copy()


def ae_loss(scores, m):
    """Mean cross-entropy -log softmax(scores)[m] over the batch."""
    scores = nn.as_tensor(scores)
    m = np.asarray(m, dtype=np.intp)
    return nn.tmean(nn.logsumexp(scores) - nn.pick(scores, m))


def classify(scores):
    """Hard decisions from score rows; ties resolve to the lowest index."""
    data = scores.data if isinstance(scores, nn.Tensor) else np.asarray(scores)
    return np.argmax(data, axis=1)


# -- training -------------------------------------------------------------------


@dataclass(frozen=True)
class TrainingRecipe:
    """Knobs for the autoencoder training loops.

    `dataset_size` counts message draws per epoch.  `lr_stages`, when
    non-empty, is a sequence of (lr, epochs) pairs overriding lr/epochs.
    The dm_* fields configure the phase-1 fine-tune of the iterative
    algorithm only.
    """

    algorithm: str = "model-aware"
    epochs: int = 10
    batch_size: int = 100
    dataset_size: int = 100_000
    lr: float = 1e-3
    lr_stages: tuple = ()
    optimizer: str = "adam"
    sampler: str = "ddim"
    ddim_steps: int = 10
    alternations: int = 1
    successive: bool = False
    dm_epochs: int = 2
    dm_dataset_size: int = 50_000
    dm_batch_size: int = 100
    dm_lr: float = 1e-3

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm: {self.algorithm!r}")
        if self.sampler not in ("ddpm", "ddim"):
            raise ValueError(f"unknown sampler: {self.sampler!r}")
        if min(self.epochs, self.batch_size, self.dataset_size, self.ddim_steps) < 1:
            raise ValueError("epochs, batch_size, dataset_size, ddim_steps must be >= 1")
        if self.alternations < 0:
            raise ValueError("alternations must be >= 0")
        for pair in self.lr_stages:
            if len(pair) != 2 or pair[0] <= 0 or pair[1] < 1:
                raise ValueError("lr_stages entries must be (lr > 0, epochs >= 1)")

    def stages(self):
        return tuple(self.lr_stages) or ((self.lr, self.epochs),)


def _check_block(pair, channel):
    need = block_len(channel)
    if need is not None and pair.n != need:
        raise ValueError(f"autoencoder n={pair.n} but channel needs block length {need}")


def _loss_of_batch(pair, m, transmit, decoder_only):
    x = pair.encode(m)
    y = transmit(x)
    if decoder_only:
        y = y.detach()
    loss = ae_loss(pair.decode(y), m)
    val = loss.item()
    if not math.isfinite(val):
        raise TrainingDiverged(f"autoencoder loss non-finite: {val!r}")
    return loss, val


def _train_ae(pair, transmit, recipe, rng, *, decoder_only=False, callback=None):
    """Shared AE loop; `transmit` maps the encoded tensor to channel output."""
    opt_enc = nn.make_optimizer(recipe.optimizer, pair.encoder_params(), recipe.lr)
    opt_dec = nn.make_optimizer(recipe.optimizer, pair.decoder_params(), recipe.lr)
    msg_rng = rng.stream("messages")
    steps = max(1, math.ceil(recipe.dataset_size / recipe.batch_size))
    history = []
    epoch = 0
    for lr, n_epochs in recipe.stages():
        opt_enc.lr = lr
        opt_dec.lr = lr
        for _ in range(n_epochs):
            passes = ("decoder", "encoder") if recipe.successive else ("joint",)
            total, count = 0.0, 0
            for which in passes:
                for _ in range(steps):
                    m = msg_rng.integers(0, pair.m_count, size=recipe.batch_size)
                    loss, val = _loss_of_batch(
                        pair, m, transmit, decoder_only or which == "decoder"
                    )
                    opt_enc.zero_grad()
                    opt_dec.zero_grad()
                    loss.backward()
                    if which in ("joint", "decoder"):
                        opt_dec.step()
                    if not decoder_only and which in ("joint", "encoder"):
                        opt_enc.step()
                    total += val
                    count += 1
            history.append(total / count)
            if callback is not None:
                callback(epoch, history[-1])
            epoch += 1
    return history


def train_model_aware(pair, channel, recipe, rng, *, decoder_only=False, callback=None):
    """Train encoder and decoder through the differentiable true channel."""
    _check_block(pair, channel)
    noise_rng = rng.stream("channel")
    transmit = lambda x: apply_channel_diff(channel, x, noise_rng)
    return _train_ae(pair, transmit, recipe, rng, decoder_only=decoder_only, callback=callback)


def train_pretrained(pair, dm, recipe, rng, *, decoder_only=False, callback=None):
    """Train the autoencoder through a frozen diffusion channel model."""
    if dm.net.n != pair.n:
        raise ValueError(f"diffusion model n={dm.net.n} but autoencoder n={pair.n}")
    sample_rng = rng.stream("dm-sampling")
    transmit = lambda x: dm.sample(
        recipe.sampler, x, sample_rng,
        ddim_steps=recipe.ddim_steps if recipe.sampler == "ddim" else None,
    )
    return _train_ae(pair, transmit, recipe, rng, decoder_only=decoder_only, callback=callback)


def _encoder_dataset(pair, channel, size, rng):
    """(y, x) pairs from the current encoder through the true channel."""
    xs, ys = [], []
    chunk = 1 << 16
    msg_rng = rng.stream("dataset-messages")
    ch_rng = rng.stream("dataset-channel")
    with nn.no_grad():
        for lo in range(0, size, chunk):
            m = msg_rng.integers(0, pair.m_count, size=min(chunk, size - lo))
            x = pair.encode(m).data
            xs.append(x)
            ys.append(apply_channel(channel, x, ch_rng))
    return np.concatenate(ys), np.concatenate(xs)


def train_iterative(pair, dm, channel, recipe, rng, *, callback=None):
    """Alternate diffusion-model fine-tuning and autoencoder training.

    Each alternation regenerates an encoder-specific dataset through the
    true channel, fine-tunes the diffusion model on it, then trains the
    autoencoder through the refreshed model.  With alternations = 0 this
    degenerates to plain `train_pretrained` on the model as given.
    """
    _check_block(pair, channel)
    if recipe.alternations == 0:
        return {"dm": [], "ae": [train_pretrained(pair, dm, recipe, rng, callback=callback)]}

    dm_cfg = DmTrainConfig(
        epochs=recipe.dm_epochs, batch_size=recipe.dm_batch_size,
        lr=recipe.dm_lr, optimizer="adam",
    )
    history = {"dm": [], "ae": []}
    for k in range(recipe.alternations):
        phase_rng = rng.child(f"alt{k}")
        y, x = _encoder_dataset(pair, channel, recipe.dm_dataset_size, phase_rng)
        history["dm"].append(
            train_dm(dm.net, dm.sched, dm.mode, y, x, dm_cfg, phase_rng.child("dm"))
        )
        history["ae"].append(
            train_pretrained(pair, dm, recipe, phase_rng.child("ae"), callback=callback)
        )
    return history


# -- evaluation ------------------------------------------------------------------


def wilson_interval(k, n, z=1.959963984540054):
    """95% Wilson score interval for k errors out of n trials."""
    if n < 1:
        raise ValueError("n must be >= 1")
    center = (k + z * z / 2.0) / (n + z * z)
    half = z * math.sqrt(k * (n - k) / n + z * z / 4.0) / (n + z * z)
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class SerPoint:
    ebn0_db: float
    ser: float
    ci_low: float
    ci_high: float
    n_trials: int
    n_errors: int


def evaluate_ser(pair, channel, ebn0_db_list, n_trials, rng):
    """Monte-Carlo symbol error rate of the frozen codebook on the true
    channel, one point per Eb/N0 value, with 95% Wilson intervals."""
    _check_block(pair, channel)
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    book = pair.codebook()
    points = []
    for ebn0 in ebn0_db_list:
        ch = with_noise_std(channel, ebn0_to_sigma(ebn0, pair.m_count, pair.n))
        point_rng = rng.child(f"ebn0={ebn0:g}")
        msg_rng = point_rng.stream("messages")
        ch_rng = point_rng.stream("channel")
        errors = 0
        with nn.no_grad():
            for lo in range(0, n_trials, _EVAL_CHUNK):
                m = msg_rng.integers(0, pair.m_count, size=min(_EVAL_CHUNK, n_trials - lo))
                y = apply_channel(ch, book[m], ch_rng)
                errors += int(np.sum(classify(pair.decode(nn.Tensor(y))) != m))
        lo_ci, hi_ci = wilson_interval(errors, n_trials)
        points.append(SerPoint(float(ebn0), errors / n_trials, lo_ci, hi_ci, n_trials, errors))
    return points
