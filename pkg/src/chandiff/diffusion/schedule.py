"""Noise schedules for the forward diffusion process.

A schedule fixes beta_t for t = 1..T, with alpha_t = 1 - beta_t and
abar_t = prod_{i<=t} alpha_i (abar_0 = 1).  The forward process then has
the closed form x_t = sqrt(abar_t) x_0 + sqrt(1 - abar_t) eps.

Kinds
-----
constant   beta_t = beta (default 0.05)
sigmoid    beta_t = 0.001 + 0.05 * sigmoid(1 + 12 (t - 1) / T)
cosine     abar_t = cos(t / T * pi / 2)^2, i.e. beta_t = 1 - abar_t/abar_{t-1},
           clamped to 0.999 for t < T and beta_T = 1 exactly, which drives
           abar_T to zero (a zero-SNR endpoint)

The per-step sampler noise defaults to the posterior std
sigma_t^2 = (1 - alpha_t)(1 - abar_{t-1}) / (1 - abar_t); `variance="beta"`
switches to the simpler sigma_t^2 = beta_t.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SCHEDULE_KINDS = ("constant", "sigmoid", "cosine")
VARIANCE_KINDS = ("posterior", "beta")


@dataclass(frozen=True)
class NoiseSchedule:
    """Precomputed schedule coefficients in float64.

    `beta`, `alpha`, `sigma` have length T (index t-1); `alpha_bar` has
    length T+1 with alpha_bar[0] = 1 so it can be indexed by t directly.
    """

    kind: str
    T: int
    beta: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)
    alpha_bar: np.ndarray = field(repr=False)
    sigma: np.ndarray = field(repr=False)
    variance: str = "posterior"

    def beta_t(self, t):
        self._check_t(t)
        return float(self.beta[t - 1])

    def alpha_t(self, t):
        self._check_t(t)
        return float(self.alpha[t - 1])

    def alpha_bar_t(self, t):
        if not 0 <= t <= self.T:
            raise ValueError(f"t must be in [0, {self.T}], got {t}")
        return float(self.alpha_bar[t])

    def sigma_t(self, t):
        self._check_t(t)
        return float(self.sigma[t - 1])

    def _check_t(self, t):
        if not 1 <= t <= self.T:
            raise ValueError(f"t must be in [1, {self.T}], got {t}")

    @property
    def terminal_snr(self):
        """Signal-to-noise ratio abar_T / (1 - abar_T) of the last step."""
        ab = self.alpha_bar[self.T]
        return float(ab / (1.0 - ab))

    @property
    def zero_snr(self):
        """True when the forward process ends in pure noise (abar_T = 0)."""
        return self.alpha_bar[self.T] == 0.0


def make_schedule(kind, T, *, beta=0.05, variance="posterior"):
    """Build a `NoiseSchedule` of the given kind with T steps."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if kind not in SCHEDULE_KINDS:
        raise ValueError(f"unknown schedule kind: {kind!r}")
    if variance not in VARIANCE_KINDS:
        raise ValueError(f"unknown variance kind: {variance!r}")

    t = np.arange(1, T + 1, dtype=np.float64)
    if kind == "constant":
        if not 0.0 < beta < 1.0:
            raise ValueError("constant schedule needs 0 < beta < 1")
        betas = np.full(T, float(beta))
    elif kind == "sigmoid":
        z = 1.0 + 12.0 * (t - 1.0) / T
        betas = 0.001 + 0.05 / (1.0 + np.exp(-z))
    else:  # cosine
        abar = np.cos(np.arange(0, T + 1) / T * (np.pi / 2.0)) ** 2
        betas = 1.0 - abar[1:] / abar[:-1]
        betas[:-1] = np.minimum(betas[:-1], 0.999)
        betas[-1] = 1.0

    alphas = 1.0 - betas
    alpha_bar = np.concatenate([[1.0], np.cumprod(alphas)])

    if variance == "posterior":
        # (1 - alpha_t)(1 - abar_{t-1}) / (1 - abar_t); zero at t = 1
        sig2 = (1.0 - alphas) * (1.0 - alpha_bar[:-1]) / (1.0 - alpha_bar[1:])
    else:
        sig2 = betas.copy()
    sigmas = np.sqrt(sig2)

    return NoiseSchedule(
        kind=kind,
        T=int(T),
        beta=betas,
        alpha=alphas,
        alpha_bar=alpha_bar,
        sigma=sigmas,
        variance=variance,
    )
