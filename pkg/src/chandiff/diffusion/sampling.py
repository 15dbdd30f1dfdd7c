"""Forward diffusion and reverse-time samplers.

Prediction modes
----------------
epsilon   the network predicts the noise eps added by the forward process
v         the network predicts v = sqrt(abar_t) eps - sqrt(1 - abar_t) x0

Both modes identify the same pair (x0_hat, eps_hat) through

    x0_hat  = sqrt(abar_t) x_t - sqrt(1 - abar_t) v_hat
    eps_hat = sqrt(1 - abar_t) x_t + sqrt(abar_t) v_hat

and x_t = sqrt(abar_t) x0_hat + sqrt(1 - abar_t) eps_hat holds identically.
Epsilon mode cannot recover x0_hat where abar_t = 0, so zero-SNR schedules
(cosine) require v.

Samplers
--------
ddpm_step  one stochastic ancestral step t -> t-1 with noise scale sigma_t
           from the schedule; the final step t = 1 adds no noise.  With
           noise suppressed the step is the sigma = 0 member of the same
           sampler family, which coincides with the unit-stride ddim step.
ddim_step  one deterministic step tau_i -> tau_{i-1} along a sub-trajectory
           tau_i = round(i T / S), tau_S = T.
"""

from __future__ import annotations

import math

import numpy as np

from .. import nn

PREDICTION_MODES = ("epsilon", "v")
SAMPLER_KINDS = ("ddpm", "ddim")


def check_mode(mode):
    if mode not in PREDICTION_MODES:
        raise ValueError(f"unknown prediction mode: {mode!r}")


def check_mode_schedule(mode, sched):
    """Reject combinations that divide by sqrt(abar_T) = 0."""
    check_mode(mode)
    if mode == "epsilon" and sched.zero_snr:
        raise ValueError(
            f"epsilon prediction cannot be sampled on the zero-SNR {sched.kind!r} "
            "schedule (abar_T = 0); use v"
        )


# -- forward process -----------------------------------------------------------


def forward_sample(sched, x0, t, eps):
    """Closed-form forward draw x_t = sqrt(abar_t) x0 + sqrt(1-abar_t) eps.

    `t` is a scalar step or a per-row integer array in [1, T].
    """
    x0 = np.asarray(x0)
    eps = np.asarray(eps)
    if x0.shape != eps.shape:
        raise ValueError("x0 and eps must have equal shapes")
    t = np.asarray(t)
    if np.any(t < 1) or np.any(t > sched.T):
        raise ValueError(f"t must lie in [1, {sched.T}]")
    ab = sched.alpha_bar[t]
    if ab.ndim and x0.ndim == 2:
        ab = ab[:, None]
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps


def velocity_target(sched, x0, eps, t):
    """Training target v = sqrt(abar_t) eps - sqrt(1 - abar_t) x0."""
    ab = sched.alpha_bar[np.asarray(t)]
    if ab.ndim and np.asarray(x0).ndim == 2:
        ab = ab[:, None]
    return np.sqrt(ab) * eps - np.sqrt(1.0 - ab) * x0


def recover_x0_eps(sched, mode, x_t, t, pred):
    """Map a prediction at step t to the pair (x0_hat, eps_hat)."""
    check_mode(mode)
    ab = sched.alpha_bar_t(t)
    x_t = nn.as_tensor(x_t)
    pred = nn.as_tensor(pred)
    if mode == "epsilon":
        if ab == 0.0:
            raise ValueError("epsilon prediction cannot recover x0 at abar_t = 0")
        eps_hat = pred
        x0_hat = (x_t - math.sqrt(1.0 - ab) * pred) * (1.0 / math.sqrt(ab))
    else:
        x0_hat = math.sqrt(ab) * x_t - math.sqrt(1.0 - ab) * pred
        eps_hat = math.sqrt(1.0 - ab) * x_t + math.sqrt(ab) * pred
    return x0_hat, eps_hat


# -- reverse steps --------------------------------------------------------------


def _ddim_update(sched, mode, x, t_from, t_to, pred):
    ab_i = sched.alpha_bar_t(t_from)
    ab_p = sched.alpha_bar_t(t_to)
    if mode == "epsilon":
        if ab_i == 0.0:
            raise ValueError("epsilon prediction is undefined at abar = 0; use v")
        r = math.sqrt(ab_p) / math.sqrt(ab_i)
        coef = r * math.sqrt(1.0 - ab_i) - math.sqrt(1.0 - ab_p)
        return r * x - coef * pred
    cx = math.sqrt(ab_p * ab_i) + math.sqrt((1.0 - ab_p) * (1.0 - ab_i))
    cv = math.sqrt(ab_i * (1.0 - ab_p)) - math.sqrt(ab_p * (1.0 - ab_i))
    return cx * x + cv * pred


def ddpm_step(sched, net, mode, x_t, t, c, rng=None, *, noise=None, suppress_noise=False):
    """One ancestral step from x_t to x_{t-1}.

    epsilon:  x_{t-1} = x_t/sqrt(a_t) - (1-a_t)/(sqrt(1-abar_t) sqrt(a_t)) eps_hat + sigma_t eps
    v:        x_{t-1} = sqrt(a_t) x_t - sqrt(abar_{t-1})(1-a_t)/sqrt(1-abar_t) v_hat + sigma_t eps

    No noise is added at t = 1.  `suppress_noise` selects the sigma = 0
    member of the sampler family (the deterministic unit-stride step).
    """
    check_mode(mode)
    sched._check_t(t)
    x_t = nn.as_tensor(x_t)
    pred = net(x_t, t, c)

    if suppress_noise:
        return _ddim_update(sched, mode, x_t, t, t - 1, pred)

    a = sched.alpha_t(t)
    ab = sched.alpha_bar_t(t)
    ab_prev = sched.alpha_bar_t(t - 1)
    if mode == "epsilon":
        if a == 0.0:
            raise ValueError("epsilon prediction is undefined at alpha_t = 0; use v")
        out = (1.0 / math.sqrt(a)) * x_t - ((1.0 - a) / (math.sqrt(1.0 - ab) * math.sqrt(a))) * pred
    else:
        out = math.sqrt(a) * x_t - (math.sqrt(ab_prev) * (1.0 - a) / math.sqrt(1.0 - ab)) * pred

    if t > 1:
        sig = sched.sigma_t(t)
        if sig > 0.0:
            if noise is None:
                if rng is None:
                    raise ValueError("ddpm_step needs rng or explicit noise for t > 1")
                noise = rng.standard_normal(x_t.shape)
            out = out + sig * np.asarray(noise)
    return out


def ddim_step(sched, net, mode, x, t_from, t_to, c):
    """One deterministic step from x at tau_i = t_from down to t_to."""
    check_mode(mode)
    if not 0 <= t_to < t_from <= sched.T:
        raise ValueError(f"need 0 <= t_to < t_from <= {sched.T}, got {t_from} -> {t_to}")
    x = nn.as_tensor(x)
    pred = net(x, t_from, c)
    return _ddim_update(sched, mode, x, t_from, t_to, pred)


def make_trajectory(T, S):
    """Sub-trajectory tau_i = round(i T / S), i = 1..S, deduplicated,
    with tau_S forced to T.  Returned ascending."""
    if not 1 <= S <= T:
        raise ValueError(f"need 1 <= S <= T, got S={S}, T={T}")
    taus = [int(math.floor(i * T / S + 0.5)) for i in range(1, S + 1)]
    taus[-1] = T
    uniq = sorted(set(taus))
    return np.asarray(uniq, dtype=np.intp)


def sample(sched, net, mode, sampler, c, rng, *, ddim_steps=None, x_init=None, suppress_noise=False):
    """Draw one block per condition row by running the reverse process.

    `c` may be a plain array or an autodiff tensor; in the latter case the
    output stays connected to `c` on the tape.  `x_init` overrides the
    N(0, I) draw for x_T (useful for paired comparisons).
    """
    if sampler not in SAMPLER_KINDS:
        raise ValueError(f"unknown sampler: {sampler!r}")
    check_mode_schedule(mode, sched)
    c_t = nn.as_tensor(c)
    batch, n = c_t.shape

    if x_init is None:
        x = nn.Tensor(rng.standard_normal((batch, n)))
    else:
        x = nn.as_tensor(x_init)

    if sampler == "ddpm":
        for t in range(sched.T, 0, -1):
            x = ddpm_step(sched, net, mode, x, t, c_t, rng, suppress_noise=suppress_noise)
        return x

    taus = make_trajectory(sched.T, ddim_steps if ddim_steps is not None else sched.T)
    path = np.concatenate([[0], taus])
    for k in range(len(path) - 1, 0, -1):
        x = ddim_step(sched, net, mode, x, int(path[k]), int(path[k - 1]), c_t)
    return x
