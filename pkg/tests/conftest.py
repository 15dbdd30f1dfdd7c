"""Shared fixtures and the finite-difference gradient checker."""

import numpy as np
import pytest

from chandiff import nn


def numeric_grad(fn, x, h):
    """Central-difference gradient of scalar fn at numpy array x."""
    x = np.asarray(x)
    g = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = fn(x)
        flat[i] = orig - h
        fm = fn(x)
        flat[i] = orig
        gf[i] = (fp - fm) / (2.0 * h)
    return g


def check_grad(build, x0, *, h=None, rtol=None, dtype=np.float64):
    """Compare tape gradients of `build` against central differences.

    `build(t)` maps a Tensor to a scalar Tensor.  Runs under the given
    dtype; defaults follow the 64-bit test mode (h=1e-6, rel err <= 1e-5).
    """
    if h is None:
        h = 1e-3 if dtype == np.float32 else 1e-6
    if rtol is None:
        rtol = 1e-2 if dtype == np.float32 else 1e-5
    with nn.use_dtype(dtype):
        t = nn.Tensor(np.array(x0, dtype=dtype), requires_grad=True)
        build(t).backward()
        analytic = t.grad.astype(np.float64).copy()

        def scalar(arr):
            return build(nn.Tensor(arr.astype(dtype))).item()

        numeric = numeric_grad(scalar, np.array(x0, dtype=np.float64), h)
    denom = max(np.max(np.abs(numeric)), np.max(np.abs(analytic)), 1e-8)
    rel = np.max(np.abs(analytic - numeric)) / denom
    assert rel <= rtol, f"gradient mismatch: rel err {rel:.3e} > {rtol:.0e}"
    return rel


@pytest.fixture
def rng():
    return nn.Rng(1234)


@pytest.fixture
def np_rng():
    return np.random.default_rng(99)
