"""Reverse-time steppers: algebraic identities, trajectories, determinism."""

import numpy as np
import pytest

from chandiff import nn
from chandiff.diffusion import (
    DenoiserNet,
    DiffusionModel,
    ddim_step,
    ddpm_step,
    forward_sample,
    make_schedule,
    make_trajectory,
    sample,
    velocity_target,
)

CONST = make_schedule("constant", 100, beta=0.05)
COS = make_schedule("cosine", 100)


class _FixedNet:
    """Returns a preset prediction regardless of input."""

    def __init__(self, value):
        self.value = np.asarray(value)

    def __call__(self, x_t, t, c):
        return nn.Tensor(np.broadcast_to(self.value, x_t.shape).copy())


def _zeroed(net):
    for p in net.params():
        p.data[...] = 0.0
    return net


# -- ddpm_step algebra ----------------------------------------------------------


def test_beta_to_zero_step_tends_to_identity():
    # a vanishing beta_5 inside an otherwise regular schedule: the step at
    # t = 5 has alpha ~ 1 and sigma ~ 0, so x_{t-1} -> x_t
    from chandiff.diffusion.schedule import NoiseSchedule

    beta = np.full(10, 0.05)
    beta[4] = 1e-12
    alpha = 1.0 - beta
    abar = np.concatenate([[1.0], np.cumprod(alpha)])
    sig = np.sqrt((1.0 - alpha) * (1.0 - abar[:-1]) / (1.0 - abar[1:]))
    sched = NoiseSchedule(kind="constant", T=10, beta=beta, alpha=alpha,
                          alpha_bar=abar, sigma=sig)
    x = np.random.default_rng(0).standard_normal((4, 2))
    net = _FixedNet(np.random.default_rng(1).standard_normal(2))
    out = ddpm_step(sched, net, "epsilon", x, 5, x, np.random.default_rng(2))
    np.testing.assert_allclose(out.numpy(), x, atol=1e-5)


def test_epsilon_step_matches_formula():
    g = np.random.default_rng(3)
    x = g.standard_normal((8, 3))
    pred = g.standard_normal(3)
    noise = g.standard_normal((8, 3))
    t = 40
    out = ddpm_step(CONST, _FixedNet(pred), "epsilon", x, t, x, noise=noise)
    a = CONST.alpha_t(t)
    ab = CONST.alpha_bar_t(t)
    want = x / np.sqrt(a) - (1 - a) / (np.sqrt(1 - ab) * np.sqrt(a)) * pred
    want = want + CONST.sigma_t(t) * noise
    np.testing.assert_allclose(out.numpy(), want.astype(np.float32), rtol=1e-5)


def test_v_step_matches_formula():
    g = np.random.default_rng(4)
    x = g.standard_normal((8, 3))
    pred = g.standard_normal(3)
    noise = g.standard_normal((8, 3))
    t = 40
    out = ddpm_step(COS, _FixedNet(pred), "v", x, t, x, noise=noise)
    a = COS.alpha_t(t)
    ab = COS.alpha_bar_t(t)
    ab_prev = COS.alpha_bar_t(t - 1)
    want = np.sqrt(a) * x - np.sqrt(ab_prev) * (1 - a) / np.sqrt(1 - ab) * pred
    want = want + COS.sigma_t(t) * noise
    np.testing.assert_allclose(out.numpy(), want.astype(np.float32), rtol=1e-5)


def test_final_step_adds_no_noise():
    g = np.random.default_rng(5)
    x = g.standard_normal((4, 2))
    out1 = ddpm_step(CONST, _FixedNet([0.1, -0.2]), "epsilon", x, 1, x,
                     np.random.default_rng(10))
    out2 = ddpm_step(CONST, _FixedNet([0.1, -0.2]), "epsilon", x, 1, x,
                     np.random.default_rng(999))
    np.testing.assert_array_equal(out1.numpy(), out2.numpy())


def test_v_vs_epsilon_step_identity():
    # predictions linked by the conversion identities give identical steps
    g = np.random.default_rng(6)
    x0 = g.standard_normal((16, 3))
    eps = g.standard_normal((16, 3))
    for t in (2, 40, 99):
        x_t = forward_sample(CONST, x0, t, eps)
        v = velocity_target(CONST, x0, eps, t)
        noise = g.standard_normal((16, 3))
        out_eps = ddpm_step(CONST, _EpsRowNet(eps), "epsilon", x_t, t, x_t, noise=noise)
        out_v = ddpm_step(CONST, _EpsRowNet(v), "v", x_t, t, x_t, noise=noise)
        np.testing.assert_allclose(out_eps.numpy(), out_v.numpy(), atol=1e-5)


class _EpsRowNet:
    """Returns a preset full (batch, n) prediction."""

    def __init__(self, rows):
        self.rows = np.asarray(rows)

    def __call__(self, x_t, t, c):
        return nn.Tensor(self.rows.copy())


def test_ddim_v_vs_epsilon_identity():
    g = np.random.default_rng(7)
    x0 = g.standard_normal((16, 3))
    eps = g.standard_normal((16, 3))
    for t_from, t_to in [(100, 80), (60, 20), (10, 0)]:
        x_t = forward_sample(CONST, x0, t_from, eps)
        ab = CONST.alpha_bar_t(t_from)
        v = velocity_target(CONST, x0, eps, t_from)
        out_eps = ddim_step(CONST, _EpsRowNet(eps), "epsilon", x_t, t_from, t_to, x_t)
        out_v = ddim_step(CONST, _EpsRowNet(v), "v", x_t, t_from, t_to, x_t)
        np.testing.assert_allclose(out_eps.numpy(), out_v.numpy(), atol=1e-5)
        _ = ab


def test_ddim_identity_when_alphas_equal():
    # eps_hat = 0 and (nearly) equal alpha_bar endpoints -> identity map
    from chandiff.diffusion.schedule import NoiseSchedule

    beta = np.full(10, 0.05)
    beta[4] = 1e-12
    alpha = 1.0 - beta
    abar = np.concatenate([[1.0], np.cumprod(alpha)])
    sig = np.sqrt((1.0 - alpha) * (1.0 - abar[:-1]) / (1.0 - abar[1:]))
    sched = NoiseSchedule(kind="constant", T=10, beta=beta, alpha=alpha,
                          alpha_bar=abar, sigma=sig)
    x = np.random.default_rng(8).standard_normal((4, 2))
    out = ddim_step(sched, _FixedNet([0.0, 0.0]), "epsilon", x, 5, 4, x)
    np.testing.assert_allclose(out.numpy(), x, atol=1e-6)


def test_ddim_unit_stride_equals_suppressed_ddpm():
    g = np.random.default_rng(9)
    x = g.standard_normal((8, 2))
    pred = g.standard_normal((8, 2))
    for sched, mode in [(CONST, "epsilon"), (CONST, "v"), (COS, "v")]:
        for t in (2, 50, 100):
            if mode == "epsilon" and sched.alpha_bar_t(t) == 0.0:
                continue
            net = _EpsRowNet(pred)
            a = ddpm_step(sched, net, mode, x, t, x, suppress_noise=True)
            b = ddim_step(sched, net, mode, x, t, t - 1, x)
            np.testing.assert_allclose(a.numpy(), b.numpy(), atol=1e-5)


def test_oracle_reverse_roundtrip_recovers_x0():
    # forward to T with known eps, then reverse with the oracle prediction,
    # noise suppressed: ends within 1e-4 of x0
    sched = make_schedule("constant", 10, beta=0.01)
    g = np.random.default_rng(10)
    x0 = g.standard_normal((8, 2))
    eps = g.standard_normal((8, 2))
    x = forward_sample(sched, x0, 10, eps)

    for t in range(10, 0, -1):
        # oracle eps_hat for the current x: eps consistent with (x, x0) at step t
        ab = sched.alpha_bar_t(t)
        eps_t = (np.asarray(x.data if isinstance(x, nn.Tensor) else x)
                 - np.sqrt(ab) * x0) / np.sqrt(1.0 - ab)
        x = ddpm_step(sched, _EpsRowNet(eps_t), "epsilon", x, t, x0,
                      suppress_noise=True)
    np.testing.assert_allclose(np.asarray(x.numpy(), dtype=np.float64), x0, atol=1e-4)


def test_ddim_exact_pred_roundtrip_is_marginal_preserving():
    # with the exact eps used in the forward draw, one ddim jump T -> 0
    # returns x0 exactly (the deterministic coupling inverts)
    g = np.random.default_rng(11)
    x0 = g.standard_normal((64, 4))
    eps = g.standard_normal((64, 4))
    x_T = forward_sample(CONST, x0, 100, eps)
    out = ddim_step(CONST, _EpsRowNet(eps), "epsilon", x_T, 100, 0, x_T)
    np.testing.assert_allclose(out.numpy(), x0, atol=1e-4)


def test_ddim_rejects_bad_ranges_and_zero_snr_epsilon():
    net = _FixedNet([0.0, 0.0])
    x = np.ones((2, 2))
    with pytest.raises(ValueError):
        ddim_step(CONST, net, "epsilon", x, 50, 50, x)
    with pytest.raises(ValueError):
        ddim_step(CONST, net, "epsilon", x, 20, 50, x)
    with pytest.raises(ValueError):
        ddim_step(COS, net, "epsilon", x, 100, 50, x)  # abar_T = 0


# -- trajectories ----------------------------------------------------------------


def test_trajectory_full():
    np.testing.assert_array_equal(make_trajectory(100, 100), np.arange(1, 101))


def test_trajectory_five_step_example():
    np.testing.assert_array_equal(make_trajectory(100, 5), [20, 40, 60, 80, 100])


def test_trajectory_single_shot():
    np.testing.assert_array_equal(make_trajectory(100, 1), [100])


def test_trajectory_ends_at_T_and_is_increasing():
    for T, S in [(100, 7), (100, 3), (37, 9), (10, 10), (250, 13)]:
        tr = make_trajectory(T, S)
        assert tr[-1] == T
        assert np.all(np.diff(tr) > 0)
        assert 1 <= tr[0]
        assert len(tr) <= S


def test_trajectory_validates():
    with pytest.raises(ValueError):
        make_trajectory(10, 0)
    with pytest.raises(ValueError):
        make_trajectory(10, 11)


# -- sample ----------------------------------------------------------------------


def test_zero_net_ddim_variance_matches_coefficient_product():
    # zero v_hat makes each ddim step x -> cx * x; the whole chain is linear
    net = _zeroed(DenoiserNet(2, 100, 8, nn.Rng(0).stream("i")))
    c = np.zeros((20_000, 2))
    out = sample(COS, net, "v", "ddim", c, np.random.default_rng(12), ddim_steps=10).numpy()
    taus = make_trajectory(100, 10)
    path = np.concatenate([[0], taus])
    scale = 1.0
    for k in range(len(path) - 1, 0, -1):
        ab_i = COS.alpha_bar_t(int(path[k]))
        ab_p = COS.alpha_bar_t(int(path[k - 1]))
        scale *= np.sqrt(ab_p * ab_i) + np.sqrt((1 - ab_p) * (1 - ab_i))
    assert out.var() == pytest.approx(scale**2, rel=0.02)


def test_ddim_bitwise_deterministic():
    net = DenoiserNet(2, 100, 16, nn.Rng(1).stream("i"))
    c = np.random.default_rng(13).standard_normal((32, 2))
    x_init = np.random.default_rng(14).standard_normal((32, 2))
    a = sample(COS, net, "v", "ddim", c, np.random.default_rng(0),
               ddim_steps=10, x_init=x_init).numpy()
    b = sample(COS, net, "v", "ddim", c, np.random.default_rng(1),
               ddim_steps=10, x_init=x_init).numpy()
    assert np.array_equal(a, b)  # rng unused on the deterministic path


def test_ddim_full_equals_suppressed_ddpm_chain():
    net = DenoiserNet(2, 100, 16, nn.Rng(2).stream("i"))
    c = np.random.default_rng(15).standard_normal((16, 2))
    x_init = np.random.default_rng(16).standard_normal((16, 2))
    a = sample(COS, net, "v", "ddim", c, np.random.default_rng(0),
               ddim_steps=100, x_init=x_init).numpy()
    b = sample(COS, net, "v", "ddpm", c, np.random.default_rng(0),
               x_init=x_init, suppress_noise=True).numpy()
    np.testing.assert_allclose(a, b, atol=1e-5)


def test_sample_epsilon_on_cosine_rejected():
    net = DenoiserNet(2, 100, 8, nn.Rng(3).stream("i"))
    with pytest.raises(ValueError):
        sample(COS, net, "epsilon", "ddpm", np.zeros((4, 2)), np.random.default_rng(0))


def test_sample_grad_flows_to_condition_frozen_noise():
    # finite-difference check of d(sum x0_hat)/dc through a short chain
    T = 6
    sched = make_schedule("constant", T, beta=0.05)
    with nn.use_dtype(np.float64):
        net = DenoiserNet(2, T, 6, nn.Rng(4).stream("i"))
        c0 = np.random.default_rng(17).standard_normal((3, 2))
        x_init = np.random.default_rng(18).standard_normal((3, 2))

        def run(c_arr):
            c_t = nn.Tensor(np.asarray(c_arr, dtype=np.float64), requires_grad=True)
            out = sample(sched, net, "epsilon", "ddim", c_t,
                         np.random.default_rng(0), ddim_steps=T, x_init=x_init)
            return out.sum(), c_t

        loss, c_t = run(c0)
        loss.backward()
        analytic = c_t.grad.copy()

        h = 1e-6
        numeric = np.zeros_like(c0)
        for i in range(c0.shape[0]):
            for j in range(c0.shape[1]):
                cp = c0.copy()
                cp[i, j] += h
                fp, _ = run(cp)
                cm = c0.copy()
                cm[i, j] -= h
                fm, _ = run(cm)
                numeric[i, j] = (fp.item() - fm.item()) / (2 * h)
        denom = max(np.abs(numeric).max(), np.abs(analytic).max(), 1e-8)
        assert np.abs(analytic - numeric).max() / denom <= 1e-5


def test_diffusion_model_wrapper_delegates():
    net = DenoiserNet(2, 100, 8, nn.Rng(5).stream("i"))
    dm = DiffusionModel(net=net, sched=COS, mode="v")
    c = np.zeros((8, 2))
    out = dm.sample("ddim", c, np.random.default_rng(19), ddim_steps=5)
    assert out.shape == (8, 2)
