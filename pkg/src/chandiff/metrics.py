"""Distribution-comparison metrics and fading-statistics extraction."""

from __future__ import annotations

import numpy as np

from .channels import clarke_covariance, unpack_complex


def wasserstein1_1d(x, y):
    """W1 distance between two equal-size 1-d samples.

    Sorting both samples pairs order statistics, which attains the optimal
    coupling in one dimension: W1 = mean |x_(j) - y_(j)|.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size != y.size:
        raise ValueError("samples must have equal size")
    if x.size == 0:
        raise ValueError("samples must be non-empty")
    return float(np.mean(np.abs(np.sort(x) - np.sort(y))))


def swd(a, b, n_projections=128, rng=None, seed=0):
    """Sliced Wasserstein distance between two point clouds (n, d).

    Projects both clouds onto `n_projections` shared random unit directions
    and averages the 1-d W1 distances.  Unequal sample counts are handled
    by subsampling the larger cloud without replacement.
    """
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape[1] != b.shape[1]:
        raise ValueError("point clouds must share the feature dimension")
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("point clouds must be non-empty")
    if n_projections < 1:
        raise ValueError("n_projections must be >= 1")
    if rng is None:
        rng = np.random.default_rng(seed)

    if a.shape[0] > b.shape[0]:
        a = a[rng.choice(a.shape[0], size=b.shape[0], replace=False)]
    elif b.shape[0] > a.shape[0]:
        b = b[rng.choice(b.shape[0], size=a.shape[0], replace=False)]

    dirs = rng.normal(size=(n_projections, a.shape[1]))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    pa = np.sort(a @ dirs.T, axis=0)
    pb = np.sort(b @ dirs.T, axis=0)
    return float(np.mean(np.abs(pa - pb)))


def empirical_cdf_and_hist(values, bins=50):
    """Sorted sample with CDF levels, plus a density-normalized histogram.

    Returns ((xs, cdf), (edges, density)).
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise ValueError("values must be non-empty")
    xs = np.sort(values)
    cdf = np.arange(1, xs.size + 1, dtype=np.float64) / xs.size
    density, edges = np.histogram(values, bins=bins, density=True)
    return (xs, cdf), (edges, density)


def extract_fading_covariance(generator, model, n_samples, rng):
    """Estimate the complex fading covariance a generator has learned.

    Feeds the complex all-ones block (packed as Re=1, Im=0 pairs) through
    `generator(c, rng) -> y` so the output is h + z per complex symbol,
    estimates the complex covariance of the unpacked outputs, removes the
    sigma^2 I noise term, and symmetrizes.

    Returns (cov, mad) where mad is the mean absolute deviation from the
    Clarke ground truth for `model`.
    """
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    c = np.zeros((n_samples, 2 * model.n_c))
    c[:, 0::2] = 1.0
    y = unpack_complex(np.asarray(generator(c, rng)))
    mu = y.mean(axis=0, keepdims=True)
    d = y - mu
    cov = d.conj().T @ d / (y.shape[0] - 1)
    cov -= model.sigma**2 * np.eye(model.n_c)
    cov = (cov + cov.conj().T) / 2.0
    truth = clarke_covariance(model.n_c, model.fd_ts)
    mad = float(np.mean(np.abs(cov - truth)))
    return cov, mad
