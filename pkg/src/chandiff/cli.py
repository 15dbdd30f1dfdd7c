"""Command-line entry points.

Subcommands
-----------
gen-data        draw (channel output, condition) training pairs
train-dm        train the conditional denoiser on generated or loaded pairs
train-ae        train the autoencoder (model-aware | pretrain | iterative)
eval-swd        sliced Wasserstein distance of generated vs. true outputs
eval-ser        symbol error rate sweep of a trained autoencoder
eval-cov        fading covariance extracted from a generator vs. analytic
sample          emit generated channel outputs for given conditions
bench-sampling  wall-clock cost of ddpm vs. ddim at several step counts

Every command reads one YAML config (--config), honors --seed/--scale/--out
overrides, writes its tables as CSV plus rendered PNG figures, and drops a
JSON manifest with the config echo, seed, git version, and timing so
deterministic artifacts can be regenerated bit for bit.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime
import json
import subprocess
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, nn, report
from .channels import apply_channel
from .checkpoint import load_ae, load_dm, save_ae, save_dm
from .config import load_config
from .diffusion import (
    DenoiserNet,
    DiffusionModel,
    DmTrainConfig,
    make_schedule,
    train_dm,
)
from .e2e import (
    AutoencoderPair,
    evaluate_ser,
    train_iterative,
    train_model_aware,
    train_pretrained,
)
from .errors import CheckpointError, ConfigError, TrainingDiverged
from .metrics import extract_fading_covariance, swd

_GEN_CHUNK = 8192


# -- small utilities ---------------------------------------------------------


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, header, rows):
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return path


def _git_describe():
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=10,
        )
        return out.stdout.strip() or "unknown"
    except OSError:
        return "unknown"


def _write_manifest(out_dir, command, args, cfg, seed, started, artifacts, deterministic=True):
    manifest = {
        "command": command,
        "argv": sys.argv[1:],
        "args": {k: v for k, v in vars(args).items() if k != "command"},
        "package_version": __version__,
        "git": _git_describe(),
        "config_path": str(args.config),
        "config": cfg.raw,
        "seed": seed,
        "scale": args.scale,
        "started_utc": datetime.datetime.fromtimestamp(
            started, datetime.timezone.utc
        ).isoformat(),
        "elapsed_seconds": round(time.time() - started, 3),
        "deterministic": deterministic,
        "artifacts": [Path(a).name for a in artifacts],
    }
    path = Path(out_dir) / f"{command.replace('-', '_')}_manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _make_pairs(cfg, rng):
    """Draw (channel output, condition) pairs per the config."""
    n = cfg.block_n()
    channel = cfg.build_channel()
    c = rng.stream("conditions").standard_normal((cfg.dm.dataset_size, n))
    y = apply_channel(channel, c, rng.stream("channel"))
    return y.astype(np.float32), c.astype(np.float32)


def _load_pairs(path):
    with np.load(path) as z:
        return z["x0"], z["c"]


def _build_dm(cfg, rng):
    sched = make_schedule(cfg.schedule.kind, cfg.schedule.T,
                          beta=cfg.schedule.beta, variance=cfg.schedule.variance)
    net = DenoiserNet(cfg.block_n(), cfg.schedule.T, cfg.dm.n_hidden, rng.stream("dm-init"))
    return DiffusionModel(net=net, sched=sched, mode=cfg.dm.mode)


def _check_dm(cfg, dm, path):
    """Abort before any training if a loaded model disagrees with the config."""
    problems = []
    if dm.net.n != cfg.block_n():
        problems.append(f"n={dm.net.n} vs config {cfg.block_n()}")
    if dm.mode != cfg.dm.mode:
        problems.append(f"mode={dm.mode} vs config {cfg.dm.mode}")
    if dm.net.n_hidden != cfg.dm.n_hidden:
        problems.append(f"n_hidden={dm.net.n_hidden} vs config {cfg.dm.n_hidden}")
    if dm.sched.kind != cfg.schedule.kind or dm.sched.T != cfg.schedule.T:
        problems.append(
            f"schedule={dm.sched.kind}/T={dm.sched.T} vs config "
            f"{cfg.schedule.kind}/T={cfg.schedule.T}"
        )
    if problems:
        raise CheckpointError(f"{path}: checkpoint/config mismatch: " + "; ".join(problems))


def _generate(dm, c, rng, sampler, steps):
    """Chunked inference-mode sampling; returns a float64 array."""
    outs = []
    with nn.no_grad():
        for lo in range(0, len(c), _GEN_CHUNK):
            block = c[lo : lo + _GEN_CHUNK]
            kw = {"ddim_steps": steps} if sampler == "ddim" else {}
            outs.append(dm.sample(sampler, block, rng, **kw).data.astype(np.float64))
    return np.concatenate(outs)


# -- command implementations -----------------------------------------------------


def cmd_gen_data(args, cfg, rng, out_dir):
    y, c = _make_pairs(cfg, rng.child("data"))
    path = out_dir / "data.npz"
    np.savez(path, x0=y, c=c)
    print(f"wrote {len(y)} pairs to {path}")
    return [path]


def cmd_train_dm(args, cfg, rng, out_dir):
    if args.data:
        y, c = _load_pairs(args.data)
    else:
        y, c = _make_pairs(cfg, rng.child("data"))
    dm = _build_dm(cfg, rng)
    train_cfg = DmTrainConfig(
        epochs=cfg.dm.epochs, batch_size=cfg.dm.batch_size,
        lr=cfg.dm.lr, optimizer=cfg.dm.optimizer,
    )
    history = train_dm(
        dm.net, dm.sched, dm.mode, y, c, train_cfg, rng.child("dm-train"),
        callback=lambda e, l: print(f"epoch {e + 1}/{train_cfg.epochs}  loss {l:.6f}"),
    )
    ckpt = out_dir / "dm.ckpt"
    save_dm(ckpt, dm, config=cfg.raw, meta={"seed": cfg.seed, "final_loss": history[-1]})
    hist_path = write_jsonl(
        out_dir / "dm_history.jsonl",
        [{"epoch": i + 1, "loss": l} for i, l in enumerate(history)],
    )
    fig = report.save_loss_curves({"dm": history}, out_dir / "dm_loss.png", "denoiser loss")
    print(f"saved {ckpt}")
    return [ckpt, hist_path, fig]


def cmd_train_ae(args, cfg, rng, out_dir):
    if cfg.ae is None:
        raise ConfigError("train-ae needs the ae section")
    recipe = cfg.ae.recipe
    pair = AutoencoderPair(cfg.ae.m_count, cfg.ae.n, rng.stream("ae-init"))
    channel = cfg.build_channel()
    records = []

    if recipe.algorithm == "model-aware":
        history = train_model_aware(pair, channel, recipe, rng.child("ae-train"))
        records = [{"epoch": i + 1, "loss": l, "phase": "ae"} for i, l in enumerate(history)]
        curves = {"model-aware": history}
    else:
        if not args.dm_checkpoint:
            raise ConfigError(f"algorithm {recipe.algorithm!r} needs --dm-checkpoint")
        dm, _ = load_dm(args.dm_checkpoint)
        _check_dm(cfg, dm, args.dm_checkpoint)
        if recipe.algorithm == "pretrain":
            history = train_pretrained(pair, dm, recipe, rng.child("ae-train"))
            records = [{"epoch": i + 1, "loss": l, "phase": "ae"} for i, l in enumerate(history)]
            curves = {"pretrain": history}
        else:
            hist = train_iterative(pair, dm, channel, recipe, rng.child("ae-train"))
            for k, losses in enumerate(hist["dm"]):
                records += [
                    {"alternation": k + 1, "epoch": i + 1, "loss": l, "phase": "dm"}
                    for i, l in enumerate(losses)
                ]
            for k, losses in enumerate(hist["ae"]):
                records += [
                    {"alternation": k + 1, "epoch": i + 1, "loss": l, "phase": "ae"}
                    for i, l in enumerate(losses)
                ]
            curves = {f"ae (alt {k + 1})": h for k, h in enumerate(hist["ae"])}

    ckpt = out_dir / "ae.ckpt"
    save_ae(ckpt, pair, config=cfg.raw, meta={"seed": cfg.seed, "algorithm": recipe.algorithm})
    hist_path = write_jsonl(out_dir / "ae_history.jsonl", records)
    fig = report.save_loss_curves(curves, out_dir / "ae_loss.png", "autoencoder loss")
    print(f"saved {ckpt}")
    return [ckpt, hist_path, fig]


def cmd_eval_swd(args, cfg, rng, out_dir):
    samplers = [s.strip() for s in args.samplers.split(",") if s.strip()]
    for s in samplers:
        if s not in ("truth", "ddpm", "ddim"):
            raise ConfigError(f"unknown sampler {s!r} in --samplers")
    channel = cfg.build_channel()
    n = cfg.block_n()
    n_samples = cfg.eval.swd_samples
    cond = rng.stream("conditions").standard_normal((n_samples, n))
    truth = apply_channel(channel, cond, rng.stream("true-channel"))

    dm = None
    if any(s in ("ddpm", "ddim") for s in samplers):
        if not args.checkpoint:
            raise ConfigError("--checkpoint is required for ddpm/ddim rows")
        dm, _ = load_dm(args.checkpoint)
        _check_dm(cfg, dm, args.checkpoint)

    def row_swd(gen):
        # identical projections row to row, so the S trend is comparable
        return swd(gen, truth, cfg.eval.swd_projections, rng.child("swd").stream("projections"))

    rows = []
    for sampler in samplers:
        if sampler == "truth":
            rows.append((cfg.schedule.kind, "truth", 0, row_swd(truth)))
        elif sampler == "ddpm":
            gen = _generate(dm, cond, rng.child("gen").stream("ddpm"), "ddpm", None)
            rows.append((cfg.schedule.kind, "ddpm", cfg.schedule.T, row_swd(gen)))
        else:
            for s in cfg.eval.s_values:
                gen = _generate(dm, cond, rng.child("gen").stream(f"ddim{s}"), "ddim", s)
                rows.append((cfg.schedule.kind, "ddim", s, row_swd(gen)))

    csv = write_csv(out_dir / "swd.csv", ("schedule", "sampler", "s", "swd"), rows)
    fig = report.save_swd_vs_steps(
        [dict(zip(("schedule", "sampler", "s", "swd"), r)) for r in rows],
        out_dir / "swd.png",
    )
    for r in rows:
        print(f"{r[0]:>9s} {r[1]:>6s} S={r[2]:<4d} swd={r[3]:.6f}")
    return [csv, fig]


def cmd_eval_ser(args, cfg, rng, out_dir):
    if not args.checkpoint:
        raise ConfigError("eval-ser needs --checkpoint (an ae checkpoint)")
    pair, _ = load_ae(args.checkpoint)
    if cfg.ae is not None and (pair.m_count != cfg.ae.m_count or pair.n != cfg.ae.n):
        raise CheckpointError(
            f"{args.checkpoint}: checkpoint M={pair.m_count}, n={pair.n} "
            f"disagrees with config ae section"
        )
    channel = cfg.build_channel()
    points = evaluate_ser(pair, channel, cfg.eval.ebn0_db, cfg.eval.trials, rng.child("ser"))
    rows = [
        (p.ebn0_db, p.ser, p.ci_low, p.ci_high, p.n_trials, p.n_errors) for p in points
    ]
    csv = write_csv(
        out_dir / "ser.csv",
        ("ebn0_db", "ser", "ci_low", "ci_high", "trials", "errors"),
        rows,
    )
    fig = report.save_ser_curves({args.label: points}, out_dir / "ser.png")
    for p in points:
        print(f"Eb/N0 {p.ebn0_db:5.1f} dB  SER {p.ser:.6f}  [{p.ci_low:.6f}, {p.ci_high:.6f}]")
    return [csv, fig]


def cmd_eval_cov(args, cfg, rng, out_dir):
    if cfg.channel.kind != "clarke":
        raise ConfigError("eval-cov needs channel.kind = clarke")
    channel = cfg.build_channel()
    if args.use_truth:
        generator = lambda c, g: apply_channel(channel, c, g)
        label = "truth"
    else:
        if not args.checkpoint:
            raise ConfigError("eval-cov needs --checkpoint or --use-truth")
        dm, _ = load_dm(args.checkpoint)
        _check_dm(cfg, dm, args.checkpoint)
        generator = lambda c, g: _generate(dm, c, g, args.sampler, args.steps)
        label = args.sampler
    cov, mad = extract_fading_covariance(
        generator, channel, cfg.eval.cov_samples, rng.child("cov").stream("draws")
    )
    from .channels import clarke_covariance

    truth = clarke_covariance(channel.n_c, channel.fd_ts)
    lags = np.arange(channel.n_c)
    emp_profile = np.array([np.mean(np.diagonal(cov, k)) for k in lags])
    rows = [
        (int(k), float(truth[0, k]), float(emp_profile[k].real), float(emp_profile[k].imag))
        for k in lags
    ]
    csv = write_csv(out_dir / "cov.csv", ("lag", "truth_j0", "est_re", "est_im"), rows)
    summary = out_dir / "cov_summary.json"
    summary.write_text(
        json.dumps({"generator": label, "mean_abs_dev": mad, "n_c": channel.n_c,
                    "fd_ts": channel.fd_ts, "samples": cfg.eval.cov_samples},
                   indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    fig = report.save_covariance_maps(truth, cov, out_dir / "cov.png")
    print(f"mean abs deviation from analytic covariance: {mad:.6f}")
    return [csv, summary, fig]


def cmd_sample(args, cfg, rng, out_dir):
    if not args.checkpoint:
        raise ConfigError("sample needs --checkpoint (a dm checkpoint)")
    dm, _ = load_dm(args.checkpoint)
    _check_dm(cfg, dm, args.checkpoint)
    n = cfg.block_n()
    if args.conditions:
        with np.load(args.conditions) as z:
            cond = np.asarray(z["c"], dtype=np.float64)
        if cond.ndim != 2 or cond.shape[1] != n:
            raise ConfigError(f"--conditions must hold a (count, {n}) array under 'c'")
    else:
        cond = rng.stream("conditions").standard_normal((cfg.eval.sample_count, n))
    gen = _generate(dm, cond, rng.child("gen").stream(args.sampler), args.sampler, args.steps)
    truth = apply_channel(cfg.build_channel(), cond, rng.stream("true-channel"))

    npz = out_dir / "samples.npz"
    np.savez(npz, c=cond, y=gen, y_true=truth)
    header = tuple(f"c{i}" for i in range(n)) + tuple(f"y{i}" for i in range(n))
    rows = [tuple(c_row) + tuple(y_row) for c_row, y_row in zip(cond, gen)]
    csv = write_csv(out_dir / "samples.csv", header, rows)
    fig = report.save_sample_clouds(gen, truth, out_dir / "samples.png")
    print(f"generated {len(gen)} blocks with {args.sampler}")
    return [npz, csv, fig]


def cmd_bench_sampling(args, cfg, rng, out_dir):
    if not args.checkpoint:
        raise ConfigError("bench-sampling needs --checkpoint (a dm checkpoint)")
    dm, _ = load_dm(args.checkpoint)
    _check_dm(cfg, dm, args.checkpoint)
    n = cfg.block_n()
    batch = cfg.eval.bench_batch
    cond = rng.stream("conditions").standard_normal((batch, n))
    gen_rng = rng.child("gen")

    def clock(sampler, steps):
        best = None
        for _ in range(max(1, cfg.eval.bench_repeats)):
            t0 = time.perf_counter()
            with nn.no_grad():
                kw = {"ddim_steps": steps} if sampler == "ddim" else {}
                dm.sample(sampler, cond, gen_rng.stream(f"{sampler}{steps}"), **kw)
            dt = time.perf_counter() - t0
            best = dt if best is None else min(best, dt)
        return best

    rows = []
    ddpm_t = clock("ddpm", None)
    rows.append(("ddpm", cfg.schedule.T, batch, ddpm_t))
    ddim_rows = []
    for s in sorted(cfg.eval.s_values):
        t = clock("ddim", s)
        rows.append(("ddim", s, batch, t))
        ddim_rows.append((s, t))

    s_arr = np.array([r[0] for r in ddim_rows], dtype=float)
    t_arr = np.array([r[1] for r in ddim_rows], dtype=float)
    slope, intercept = np.polyfit(s_arr, t_arr, 1)
    resid = t_arr - (slope * s_arr + intercept)
    ss_tot = float(np.sum((t_arr - t_arr.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0

    csv = write_csv(out_dir / "bench.csv", ("sampler", "s", "batch", "seconds"), rows)
    fig = report.save_bench_curve(ddim_rows, ddpm_t, (slope, intercept, r2), out_dir / "bench.png")
    summary = out_dir / "bench_summary.json"
    summary.write_text(
        json.dumps({"slope": slope, "intercept": intercept, "r2": r2,
                    "ddpm_seconds": ddpm_t, "batch": batch}, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    print(f"ddpm {ddpm_t:.3f}s; ddim fit slope {slope * 1e3:.2f} ms/step, R^2 {r2:.4f}")
    return [csv, fig, summary]


# -- argument parsing ---------------------------------------------------------------


_COMMANDS = {
    "gen-data": cmd_gen_data,
    "train-dm": cmd_train_dm,
    "train-ae": cmd_train_ae,
    "eval-swd": cmd_eval_swd,
    "eval-ser": cmd_eval_ser,
    "eval-cov": cmd_eval_cov,
    "sample": cmd_sample,
    "bench-sampling": cmd_bench_sampling,
}

_NONDETERMINISTIC = {"bench-sampling"}


def build_parser():
    parser = argparse.ArgumentParser(prog="chandiff", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="YAML experiment config")
    common.add_argument("--seed", type=int, default=None, help="override config seed")
    common.add_argument("--scale", type=int, default=1,
                        help="divide Monte-Carlo counts by this factor")
    common.add_argument("--out", default="out", help="output directory")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("gen-data", parents=[common])

    p = sub.add_parser("train-dm", parents=[common])
    p.add_argument("--data", default=None, help="npz with x0/c arrays (default: generate)")

    p = sub.add_parser("train-ae", parents=[common])
    p.add_argument("--dm-checkpoint", default=None, help="dm checkpoint for pretrain/iterative")

    p = sub.add_parser("eval-swd", parents=[common])
    p.add_argument("--checkpoint", default=None, help="dm checkpoint")
    p.add_argument("--samplers", default="truth,ddpm,ddim",
                   help="comma list from truth,ddpm,ddim")

    p = sub.add_parser("eval-ser", parents=[common])
    p.add_argument("--checkpoint", default=None, help="ae checkpoint")
    p.add_argument("--label", default="ae", help="curve label in the figure")

    p = sub.add_parser("eval-cov", parents=[common])
    p.add_argument("--checkpoint", default=None, help="dm checkpoint")
    p.add_argument("--use-truth", action="store_true", help="evaluate the true channel instead")
    p.add_argument("--sampler", default="ddim", choices=("ddpm", "ddim"))
    p.add_argument("--steps", type=int, default=10, help="ddim steps")

    p = sub.add_parser("sample", parents=[common])
    p.add_argument("--checkpoint", default=None, help="dm checkpoint")
    p.add_argument("--conditions", default=None, help="npz with a 'c' array")
    p.add_argument("--sampler", default="ddim", choices=("ddpm", "ddim"))
    p.add_argument("--steps", type=int, default=10, help="ddim steps")

    p = sub.add_parser("bench-sampling", parents=[common])
    p.add_argument("--checkpoint", default=None, help="dm checkpoint")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    started = time.time()
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = dataclasses.replace(cfg, seed=args.seed)
        cfg = cfg.scaled(args.scale)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        rng = nn.Rng(cfg.seed)
        artifacts = _COMMANDS[args.command](args, cfg, rng, out_dir)
        _write_manifest(
            out_dir, args.command, args, cfg, cfg.seed, started, artifacts,
            deterministic=args.command not in _NONDETERMINISTIC,
        )
    except (ConfigError, CheckpointError, TrainingDiverged) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
