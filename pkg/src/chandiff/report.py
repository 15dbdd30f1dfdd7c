"""Matplotlib figure rendering for the CLI report paths.

Every eval/train command saves a PNG next to its delimited output; these
helpers keep the styling in one place.  The Agg backend is forced so the
CLI works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DPI = 150


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def save_loss_curves(histories, path, title="training loss"):
    """histories: {label: [per-epoch mean loss, ...]}."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, hist in histories.items():
        ax.plot(np.arange(1, len(hist) + 1), hist, marker=".", label=label)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean loss")
    ax.set_yscale("log")
    ax.set_title(title)
    if len(histories) > 1:
        ax.legend()
    ax.grid(True, alpha=0.3)
    return _finish(fig, path)


def save_ser_curves(curves, path, title="symbol error rate"):
    """curves: {label: [SerPoint, ...]} rendered on a log axis with CIs."""
    fig, ax = plt.subplots(figsize=(6, 4.5))
    floor = None
    for label, points in curves.items():
        x = [p.ebn0_db for p in points]
        y = [max(p.ser, 0.0) for p in points]
        lo = [p.ser - p.ci_low for p in points]
        hi = [p.ci_high - p.ser for p in points]
        ax.errorbar(x, y, yerr=[lo, hi], marker="o", capsize=3, label=label)
        pos = [p.ser for p in points if p.ser > 0]
        if pos:
            floor = min(floor or 1.0, min(pos))
    ax.set_yscale("log")
    if floor is not None:
        ax.set_ylim(bottom=floor / 10)
    ax.set_xlabel("Eb/N0 [dB]")
    ax.set_ylabel("SER")
    ax.set_title(title)
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    return _finish(fig, path)


def save_swd_vs_steps(rows, path, title="sliced Wasserstein distance vs. sampling steps"):
    """rows: dicts with schedule, sampler, s, swd."""
    fig, ax = plt.subplots(figsize=(6, 4))
    groups = {}
    for r in rows:
        groups.setdefault((r["schedule"], r["sampler"]), []).append((r["s"], r["swd"]))
    for (sched, sampler), pts in sorted(groups.items()):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=f"{sched}/{sampler}")
    ax.set_xlabel("sampling steps S")
    ax.set_ylabel("SWD")
    ax.set_title(title)
    ax.legend()
    ax.grid(True, alpha=0.3)
    return _finish(fig, path)


def save_covariance_maps(truth, estimate, path, title="fading covariance"):
    """Heatmaps of the analytic covariance, the estimate, and |difference|."""
    est_re = np.real(estimate)
    panels = [
        ("analytic", np.asarray(truth)),
        ("estimated (Re)", est_re),
        ("|difference|", np.abs(estimate - truth)),
    ]
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.4))
    for ax, (name, mat) in zip(axes, panels):
        im = ax.imshow(mat, cmap="viridis")
        ax.set_title(name, fontsize=10)
        fig.colorbar(im, ax=ax, fraction=0.046)
    fig.suptitle(title)
    return _finish(fig, path)


def save_sample_clouds(generated, truth, path, title="generated vs. true channel outputs"):
    """Scatter of the first two output dims plus magnitude histogram/CDF."""
    gen = np.asarray(generated)
    tru = np.asarray(truth)
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.8))

    k = min(2000, len(gen), len(tru))
    if gen.shape[1] >= 2:
        axes[0].scatter(tru[:k, 0], tru[:k, 1], s=4, alpha=0.35, label="true")
        axes[0].scatter(gen[:k, 0], gen[:k, 1], s=4, alpha=0.35, label="generated")
        axes[0].set_xlabel("dim 0")
        axes[0].set_ylabel("dim 1")
    else:
        axes[0].hist(tru[:, 0], bins=60, alpha=0.5, density=True, label="true")
        axes[0].hist(gen[:, 0], bins=60, alpha=0.5, density=True, label="generated")
    axes[0].set_title("output scatter", fontsize=10)
    axes[0].legend(markerscale=2)

    gmag = np.linalg.norm(gen, axis=1)
    tmag = np.linalg.norm(tru, axis=1)
    bins = np.histogram_bin_edges(np.concatenate([gmag, tmag]), bins=60)
    axes[1].hist(tmag, bins=bins, density=True, alpha=0.5, label="true")
    axes[1].hist(gmag, bins=bins, density=True, alpha=0.5, label="generated")
    axes[1].set_title("block magnitude histogram", fontsize=10)
    axes[1].legend()

    for mag, label in ((tmag, "true"), (gmag, "generated")):
        xs = np.sort(mag)
        axes[2].plot(xs, np.arange(1, xs.size + 1) / xs.size, label=label)
    axes[2].set_title("block magnitude CDF", fontsize=10)
    axes[2].legend()

    fig.suptitle(title)
    return _finish(fig, path)


def save_bench_curve(ddim_rows, ddpm_seconds, fit, path, title="sampling wall-clock"):
    """ddim_rows: [(s, seconds)]; fit: (slope, intercept, r2)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    s = np.array([r[0] for r in ddim_rows], dtype=float)
    t = np.array([r[1] for r in ddim_rows], dtype=float)
    ax.plot(s, t, "o", label="ddim")
    slope, intercept, r2 = fit
    grid = np.linspace(0, s.max() * 1.05, 50)
    ax.plot(grid, slope * grid + intercept, "--", label=f"fit (R^2={r2:.4f})")
    if ddpm_seconds is not None:
        ax.axhline(ddpm_seconds, color="tab:red", ls=":", label="ddpm (S=T)")
    ax.set_xlabel("sampling steps S")
    ax.set_ylabel("seconds")
    ax.set_title(title)
    ax.legend()
    ax.grid(True, alpha=0.3)
    return _finish(fig, path)
