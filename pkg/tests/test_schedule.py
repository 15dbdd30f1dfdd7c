"""Noise schedules: analytic anchor points and structural invariants."""

import numpy as np
import pytest

from chandiff.diffusion import make_schedule


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def test_constant_terminal_snr_reference_value():
    s = make_schedule("constant", 100, beta=0.05)
    snr = s.alpha_bar_t(100) / (1.0 - s.alpha_bar_t(100))
    assert snr == pytest.approx(5.96e-3, abs=1e-5)
    assert s.terminal_snr == pytest.approx(snr)
    # independent oracle: 0.95^100 / (1 - 0.95^100)
    ab = 0.95**100
    assert snr == pytest.approx(ab / (1.0 - ab), rel=1e-12)


def test_cosine_zero_snr_exact_and_midpoint():
    s = make_schedule("cosine", 100)
    assert s.alpha_bar_t(100) == 0.0
    assert s.zero_snr
    assert s.alpha_bar_t(50) == pytest.approx(0.5, abs=1e-6)
    assert s.beta_t(100) == 1.0


def test_cosine_analytic_profile():
    T = 100
    s = make_schedule("cosine", T)
    for t in (1, 10, 37, 80, 99):
        want = np.cos(np.pi * t / (2.0 * T)) ** 2
        assert s.alpha_bar_t(t) == pytest.approx(want, rel=1e-9)


def test_sigmoid_endpoint_betas():
    s = make_schedule("sigmoid", 100)
    want1 = 0.001 + 0.05 * _sigmoid(1.0 + 12.0 * 0.0 / 100.0)
    wantT = 0.001 + 0.05 * _sigmoid(1.0 + 12.0 * 99.0 / 100.0)
    assert s.beta_t(1) == pytest.approx(want1, rel=1e-12)
    assert s.beta_t(100) == pytest.approx(wantT, rel=1e-12)
    assert s.beta_t(1) == pytest.approx(0.0375529, abs=1e-7)
    assert s.beta_t(100) == pytest.approx(0.051, abs=1e-4)
    betas = [s.beta_t(t) for t in range(1, 101)]
    assert all(a < b for a, b in zip(betas, betas[1:]))


@pytest.mark.parametrize("kind", ["constant", "sigmoid", "cosine"])
def test_schedule_invariants(kind):
    s = make_schedule(kind, 100)
    assert s.alpha_bar.shape == (101,)
    assert s.alpha_bar[0] == 1.0
    assert np.all(np.diff(s.alpha_bar) <= 0)
    for t in range(1, 101):
        assert 0.0 < s.beta_t(t) <= 1.0
        assert s.alpha_t(t) == pytest.approx(1.0 - s.beta_t(t), rel=1e-12)
    # cumulative product consistency
    acc = 1.0
    for t in range(1, 101):
        acc *= s.alpha_t(t)
        assert s.alpha_bar_t(t) == pytest.approx(acc, rel=1e-9, abs=1e-15)


@pytest.mark.parametrize("kind", ["constant", "sigmoid", "cosine"])
def test_posterior_sigma_formula(kind):
    s = make_schedule(kind, 100)
    assert s.sigma_t(1) == 0.0  # alpha_bar_0 = 1 makes the t=1 posterior exact
    for t in range(2, 101):
        want = np.sqrt(
            (1.0 - s.alpha_t(t)) * (1.0 - s.alpha_bar_t(t - 1)) / (1.0 - s.alpha_bar_t(t))
        )
        assert s.sigma_t(t) == pytest.approx(want, rel=1e-12)


def test_beta_variance_flag():
    s = make_schedule("constant", 100, beta=0.05, variance="beta")
    for t in range(2, 101):
        assert s.sigma_t(t) == pytest.approx(np.sqrt(0.05), rel=1e-12)


def test_zero_snr_iff_beta_T_one():
    cos = make_schedule("cosine", 100)
    assert cos.beta_t(100) == 1.0 and cos.alpha_bar_t(100) == 0.0
    const = make_schedule("constant", 100, beta=0.05)
    assert const.beta_t(100) < 1.0 and const.alpha_bar_t(100) > 0.0


def test_invalid_kind_and_t():
    with pytest.raises(ValueError):
        make_schedule("linear", 100)
    with pytest.raises(ValueError):
        make_schedule("constant", 0)
    s = make_schedule("constant", 10)
    with pytest.raises(ValueError):
        s.beta_t(0)
    with pytest.raises(ValueError):
        s.beta_t(11)
    assert s.alpha_bar_t(0) == 1.0  # t = 0 is legal for alpha_bar only


def test_odd_T_cosine_still_terminates_at_zero():
    s = make_schedule("cosine", 37)
    assert s.alpha_bar_t(37) == 0.0
