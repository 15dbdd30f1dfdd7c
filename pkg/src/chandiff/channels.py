"""Channel simulators and related signal helpers.

All channels map a block of n real channel uses to n real outputs.
Complex-valued channels (solid-state amplifier, Clarke fading) interpret
the block as n/2 complex symbols packed as [Re_1, Im_1, Re_2, Im_2, ...].

Models
------
Awgn        y = x + z,            z ~ N(0, sigma^2 I)
Rayleigh    y = h o x + z,        h_i = sigma_r * sqrt(-2 ln U_i), U_i ~ U(0,1]
Sspa        y_i = P(|x_i|) x_i + z_i   per complex symbol, with the Rapp
            limiter P(a) = v0 / (1 + (v0 a / a0)^(2p))^(1/(2p)) and complex
            noise of total variance sigma^2 (sigma^2/2 per real part)
Clarke      y = h o x + z with h ~ CN(0, Sigma) jointly over the block,
            Sigma_ij = J0(2 pi fd_ts |i - j|)

`apply_channel` is the plain Monte-Carlo path on numpy arrays;
`apply_channel_diff` applies the same map to an autodiff tensor with the
random draws frozen, so gradients flow to the channel input.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Union

import numpy as np

from . import nn

# -- Bessel J0 ---------------------------------------------------------------

_SERIES_CUTOFF = 12.0
_N_SERIES = 40
_N_HANKEL = 14

# Hankel coefficients a_k = a_{k-1} * -(2k-1)^2 / (8k), a_0 = 1
_HANKEL_A = [1.0]
for _k in range(1, _N_HANKEL):
    _HANKEL_A.append(_HANKEL_A[-1] * -((2 * _k - 1) ** 2) / (8.0 * _k))


def bessel_j0(x):
    """Bessel function of the first kind, order zero.

    Uses the alternating power series sum_m (-1)^m (x/2)^(2m) / (m!)^2 for
    |x| <= 12 and the large-argument Hankel asymptotic expansion beyond;
    absolute error stays below 1e-9 everywhere.
    """
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    scalar = ax.ndim == 0
    ax = np.atleast_1d(ax)
    out = np.empty_like(ax)

    small = ax <= _SERIES_CUTOFF
    if small.any():
        xs = ax[small]
        q = xs * xs / 4.0
        term = np.ones_like(xs)
        acc = np.ones_like(xs)
        for m in range(1, _N_SERIES):
            term *= -q / (m * m)
            acc += term
        out[small] = acc

    if (~small).any():
        xl = ax[~small]
        inv2 = 1.0 / (xl * xl)
        p = np.zeros_like(xl)
        q = np.zeros_like(xl)
        # P collects even-k terms with alternating sign, Q the odd-k ones
        pw = np.ones_like(xl)
        for j in range(_N_HANKEL // 2):
            sign = -1.0 if j % 2 else 1.0
            p += sign * _HANKEL_A[2 * j] * pw
            q += sign * _HANKEL_A[2 * j + 1] * pw / xl
            pw *= inv2
        w = xl - np.pi / 4.0
        out[~small] = np.sqrt(2.0 / (np.pi * xl)) * (p * np.cos(w) - q * np.sin(w))

    return float(out[0]) if scalar else out


# -- rate / noise-level conversion ---------------------------------------------


def ebn0_to_sigma(ebn0_db, m_count, n):
    """Per-real-dimension noise std for a given Eb/N0 in dB.

    Assumes unit average transmit power per real dimension, so the rate is
    R = log2(M)/n bits per real channel use and sigma = sqrt(1/(2 R Eb/N0)).
    """
    if m_count < 2:
        raise ValueError("m_count must be at least 2")
    if n < 1:
        raise ValueError("n must be at least 1")
    bits = math.log2(m_count)
    if 2 ** round(bits) != m_count:
        warnings.warn(f"message count {m_count} is not a power of two", stacklevel=2)
    rate = bits / n
    return math.sqrt(1.0 / (2.0 * rate * 10.0 ** (ebn0_db / 10.0)))


# -- complex packing -----------------------------------------------------------


def pack_complex(z):
    """Complex (..., k) -> real (..., 2k), interleaved [Re_1, Im_1, ...]."""
    z = np.asarray(z)
    out = np.empty(z.shape[:-1] + (2 * z.shape[-1],), dtype=z.real.dtype)
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


def unpack_complex(x):
    """Inverse of `pack_complex`; last axis must have even length."""
    x = np.asarray(x)
    if x.shape[-1] % 2:
        raise ValueError("last axis must have even length")
    return x[..., 0::2] + 1j * x[..., 1::2]


# -- channel models -------------------------------------------------------------


@dataclass(frozen=True)
class Awgn:
    sigma: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")


@dataclass(frozen=True)
class Rayleigh:
    sigma_r: float
    sigma: float

    def __post_init__(self):
        if self.sigma_r <= 0:
            raise ValueError("sigma_r must be > 0")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")


@dataclass(frozen=True)
class Sspa:
    """Solid-state power amplifier with smoothness p, saturation a0, gain v0."""

    p: float
    a0: float
    v0: float
    sigma: float
    n_c: int

    def __post_init__(self):
        if self.p <= 0 or self.v0 <= 0 or self.a0 < 0:
            raise ValueError("require p > 0, v0 > 0, a0 >= 0")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.n_c < 1:
            raise ValueError("n_c must be >= 1")


@dataclass(frozen=True)
class Clarke:
    """Time-correlated flat fading with autocorrelation J0(2 pi fd_ts k)."""

    n_c: int
    fd_ts: float
    sigma: float

    def __post_init__(self):
        if self.n_c < 1:
            raise ValueError("n_c must be >= 1")
        if self.fd_ts < 0:
            raise ValueError("fd_ts must be >= 0")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")


ChannelModel = Union[Awgn, Rayleigh, Sspa, Clarke]


def block_len(model):
    """Required input block length in reals, or None if any length works."""
    if isinstance(model, (Sspa, Clarke)):
        return 2 * model.n_c
    return None


def is_complex_model(model):
    return isinstance(model, (Sspa, Clarke))


def with_noise_std(model, sigma_real):
    """Copy of `model` with noise set from a per-real-dimension std.

    Complex-symbol models store the total per-complex-dimension variance,
    so their sigma becomes sqrt(2) * sigma_real.
    """
    if is_complex_model(model):
        return replace(model, sigma=math.sqrt(2.0) * sigma_real)
    return replace(model, sigma=sigma_real)


# -- SSPA gain -------------------------------------------------------------------


def sspa_gain(a, p, a0, v0):
    """Rapp amplitude gain P(a) = v0 / (1 + (v0 a / a0)^(2p))^(1/(2p))."""
    a = np.asarray(a, dtype=np.float64)
    if a0 == 0.0:
        return np.where(a > 0, 0.0, float(v0)) if a.ndim else (0.0 if a > 0 else float(v0))
    u = v0 * a / a0
    return v0 * (1.0 + u ** (2.0 * p)) ** (-1.0 / (2.0 * p))


# -- Clarke covariance -------------------------------------------------------------


def clarke_covariance(n_c, fd_ts):
    """Toeplitz covariance Sigma_ij = J0(2 pi fd_ts |i - j|), unit diagonal."""
    if n_c < 1:
        raise ValueError("n_c must be >= 1")
    if fd_ts < 0:
        raise ValueError("fd_ts must be >= 0")
    row = bessel_j0(2.0 * np.pi * fd_ts * np.arange(n_c))
    idx = np.abs(np.arange(n_c)[:, None] - np.arange(n_c)[None, :])
    return row[idx]


def cholesky_psd(mat):
    """Lower Cholesky factor, adding escalating diagonal jitter (1e-12..1e-9)
    when the matrix is only positive semidefinite to rounding."""
    mat = np.asarray(mat, dtype=np.float64)
    for jitter in (0.0, 1e-12, 1e-11, 1e-10, 1e-9):
        try:
            return np.linalg.cholesky(mat + jitter * np.eye(mat.shape[0]))
        except np.linalg.LinAlgError:
            continue
    raise np.linalg.LinAlgError("matrix not positive semidefinite within jitter budget")


def sample_clarke_gains(model, batch, rng):
    """Draw h ~ CN(0, Sigma) rows; returns complex (batch, n_c)."""
    l_fac = cholesky_psd(clarke_covariance(model.n_c, model.fd_ts))
    g = rng.standard_normal((2, batch, model.n_c))
    z = (g[0] + 1j * g[1]) / math.sqrt(2.0)
    return z @ l_fac.T


# -- channel application ------------------------------------------------------------


def _check_input(model, x):
    x = np.asarray(x)
    if x.ndim != 2:
        raise ValueError("channel input must be 2-d (batch, n)")
    if not np.all(np.isfinite(x)):
        raise ValueError("channel input contains NaN or Inf")
    need = block_len(model)
    if need is not None and x.shape[1] != need:
        raise ValueError(f"{type(model).__name__} needs block length {need}, got {x.shape[1]}")
    if isinstance(model, (Awgn, Rayleigh)) and x.shape[1] < 1:
        raise ValueError("block length must be >= 1")
    return x


def apply_channel(model, x, rng):
    """Push a (batch, n) block through the channel; fresh draws from `rng`.

    Draw order is fixed per model (gains first, then noise), so equal seeds
    reproduce equal outputs.
    """
    x = _check_input(model, x)
    batch, n = x.shape

    if isinstance(model, Awgn):
        return x + model.sigma * rng.standard_normal(x.shape)

    if isinstance(model, Rayleigh):
        u = 1.0 - rng.random(x.shape)  # in (0, 1], keeps the log finite
        h = model.sigma_r * np.sqrt(-2.0 * np.log(u))
        return h * x + model.sigma * rng.standard_normal(x.shape)

    if isinstance(model, Sspa):
        xr, xi = x[:, 0::2], x[:, 1::2]
        g = sspa_gain(np.hypot(xr, xi), model.p, model.a0, model.v0)
        y = np.empty_like(x, dtype=np.float64)
        y[:, 0::2] = g * xr
        y[:, 1::2] = g * xi
        return y + (model.sigma / math.sqrt(2.0)) * rng.standard_normal(x.shape)

    if isinstance(model, Clarke):
        h = sample_clarke_gains(model, batch, rng)
        yc = h * unpack_complex(x)
        y = pack_complex(yc)
        return y + (model.sigma / math.sqrt(2.0)) * rng.standard_normal(x.shape)

    raise TypeError(f"unknown channel model: {type(model).__name__}")


def _interleave(re_t, im_t, n_c):
    idx = np.empty(2 * n_c, dtype=np.intp)
    idx[0::2] = np.arange(n_c)
    idx[1::2] = np.arange(n_c) + n_c
    return nn.take(nn.concat([re_t, im_t], axis=1), idx, axis=1)


def apply_channel_diff(model, x, rng):
    """Differentiable twin of `apply_channel` on an autodiff tensor.

    Gains and noise are drawn once and folded in as constants, so the
    output is differentiable with respect to the input block.
    """
    if not isinstance(x, nn.Tensor):
        raise TypeError("apply_channel_diff expects an autodiff tensor")
    _check_input(model, x.data)
    batch, n = x.shape

    if isinstance(model, Awgn):
        return x + model.sigma * rng.standard_normal((batch, n))

    if isinstance(model, Rayleigh):
        u = 1.0 - rng.random((batch, n))
        h = model.sigma_r * np.sqrt(-2.0 * np.log(u))
        return nn.mul(x, nn.Tensor(h)) + model.sigma * rng.standard_normal((batch, n))

    even = np.arange(0, n, 2)
    odd = np.arange(1, n, 2)
    xr = nn.take(x, even, axis=1)
    xi = nn.take(x, odd, axis=1)

    if isinstance(model, Sspa):
        s = xr * xr + xi * xi  # |x_i|^2, keeps the gain smooth at the origin
        u = nn.mul(s, (model.v0 / model.a0) ** 2)
        g = nn.mul(nn.power(nn.power(u, model.p) + 1.0, -1.0 / (2.0 * model.p)), model.v0)
        y = _interleave(g * xr, g * xi, model.n_c)
        noise = (model.sigma / math.sqrt(2.0)) * rng.standard_normal((batch, n))
        return y + noise

    if isinstance(model, Clarke):
        h = sample_clarke_gains(model, batch, rng)
        hr, hi = nn.Tensor(h.real.copy()), nn.Tensor(h.imag.copy())
        yr = nn.mul(xr, hr) - nn.mul(xi, hi)
        yi = nn.mul(xr, hi) + nn.mul(xi, hr)
        y = _interleave(yr, yi, model.n_c)
        noise = (model.sigma / math.sqrt(2.0)) * rng.standard_normal((batch, n))
        return y + noise

    raise TypeError(f"unknown channel model: {type(model).__name__}")
