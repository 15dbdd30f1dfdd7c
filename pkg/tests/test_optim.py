"""Optimizers vs. hand-rolled update recurrences."""

import numpy as np
import pytest

from chandiff import nn


def _param(values):
    p = nn.Parameter(np.array(values, dtype=np.float32), name="p")
    return p


def _run(opt_cls, grads, x0, **kw):
    p = _param(x0)
    opt = opt_cls([p], **kw)
    for g in grads:
        p.grad[...] = np.asarray(g, dtype=np.float32)
        opt.step()
        opt.zero_grad()
    return p.data.copy()


def adam_oracle(grads, x0, lr=1e-3, b1=0.9, b2=0.999, eps=1e-8):
    x = np.array(x0, dtype=np.float64)
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    for t, g in enumerate(grads, start=1):
        g = np.asarray(g, dtype=np.float64)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mh = m / (1 - b1**t)
        vh = v / (1 - b2**t)
        x = x - lr * mh / (np.sqrt(vh) + eps)
    return x


def nadam_oracle(grads, x0, lr=1e-3, b1=0.9, b2=0.999, eps=1e-8):
    x = np.array(x0, dtype=np.float64)
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    for t, g in enumerate(grads, start=1):
        g = np.asarray(g, dtype=np.float64)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mh = m / (1 - b1**t)
        vh = v / (1 - b2**t)
        lookahead = b1 * mh + (1 - b1) * g / (1 - b1**t)
        x = x - lr * lookahead / (np.sqrt(vh) + eps)
    return x


def rmsprop_oracle(grads, x0, lr=1e-3, decay=0.99, eps=1e-8):
    x = np.array(x0, dtype=np.float64)
    v = np.zeros_like(x)
    for g in grads:
        g = np.asarray(g, dtype=np.float64)
        v = decay * v + (1 - decay) * g * g
        x = x - lr * g / (np.sqrt(v) + eps)
    return x


_GRADS = [np.array([0.5, -1.0, 2.0]), np.array([1.5, 0.2, -0.3]),
          np.array([-0.7, 0.9, 0.1]), np.array([0.0, 0.0, 1.0])]
_X0 = [1.0, -2.0, 0.5]


@pytest.mark.parametrize("cls,oracle", [
    (nn.Adam, adam_oracle),
    (nn.NAdam, nadam_oracle),
    (nn.RMSprop, rmsprop_oracle),
])
def test_update_matches_recurrence(cls, oracle):
    got = _run(cls, _GRADS, _X0, lr=0.01)
    want = oracle(_GRADS, _X0, lr=0.01)
    np.testing.assert_allclose(got, want.astype(np.float32), rtol=2e-5, atol=2e-6)


def test_missing_grad_raises():
    p = _param(_X0)
    opt = nn.Adam([p], lr=0.01)
    p.grad = None
    with pytest.raises(ValueError, match="no gradient"):
        opt.step()


def test_zero_gradient_vector_is_noop_for_rmsprop_only_after_state():
    # with g = 0 every optimizer leaves the parameter fixed on the first step
    for cls in (nn.Adam, nn.NAdam, nn.RMSprop):
        got = _run(cls, [np.zeros(3)], _X0, lr=0.1)
        np.testing.assert_allclose(got, np.array(_X0, dtype=np.float32))


def test_deterministic_across_runs():
    a = _run(nn.Adam, _GRADS * 25, _X0, lr=0.005)
    b = _run(nn.Adam, _GRADS * 25, _X0, lr=0.005)
    assert np.array_equal(a, b)


def test_make_optimizer_dispatch_and_unknown():
    p = _param(_X0)
    assert isinstance(nn.make_optimizer("adam", [p], 0.01), nn.Adam)
    assert isinstance(nn.make_optimizer("nadam", [p], 0.01), nn.NAdam)
    assert isinstance(nn.make_optimizer("rmsprop", [p], 0.01), nn.RMSprop)
    with pytest.raises(ValueError):
        nn.make_optimizer("sgd9", [p], 0.01)


def test_adam_descends_quadratic():
    p = _param([5.0, -3.0])
    opt = nn.Adam([p], lr=0.1)
    for _ in range(500):
        opt.zero_grad()
        p.grad[...] = 2.0 * p.data  # grad of ||x||^2
        opt.step()
    assert np.abs(p.data).max() < 1e-2
