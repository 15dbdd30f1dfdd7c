"""Experiment configuration: one YAML file, validated into dataclasses.

Sections: `seed`, `channel`, `schedule`, `dm`, `ae`, `eval`.  Only
`channel` is mandatory; commands reject configs missing the sections they
need.  Validation reports the offending field path, and cross-checks
referential constraints (block lengths, schedule/mode compatibility,
trajectory lengths).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import yaml

from .channels import Awgn, Clarke, Rayleigh, Sspa, block_len, ebn0_to_sigma, with_noise_std
from .diffusion import PREDICTION_MODES, SCHEDULE_KINDS, VARIANCE_KINDS
from .e2e import ALGORITHMS, TrainingRecipe
from .errors import ConfigError


def _need(data, key, types, path, default=None, required=False):
    if key not in data:
        if required:
            raise ConfigError(f"{path}.{key} is required")
        return default
    val = data[key]
    if types is float and isinstance(val, int) and not isinstance(val, bool):
        val = float(val)
    if not isinstance(val, types) or isinstance(val, bool) and types is not bool:
        raise ConfigError(f"{path}.{key} must be {getattr(types, '__name__', types)}, got {val!r}")
    return val


def _reject_unknown(data, known, path):
    extra = set(data) - set(known)
    if extra:
        raise ConfigError(f"unknown key(s) under {path}: {', '.join(sorted(extra))}")


@dataclass(frozen=True)
class ChannelConfig:
    kind: str
    n: int | None = None
    sigma: float | None = None
    ebn0_db: float | None = None
    sigma_r: float = 1.0
    p: float = 3.0
    a0: float = 1.5
    v0: float = 5.0
    n_c: int = 4
    fd_ts: float = 0.01


@dataclass(frozen=True)
class ScheduleConfig:
    kind: str = "cosine"
    T: int = 100
    beta: float = 0.05
    variance: str = "posterior"


@dataclass(frozen=True)
class DmConfig:
    n_hidden: int = 110
    mode: str = "v"
    dataset_size: int = 100_000
    epochs: int = 10
    batch_size: int = 100
    lr: float = 1e-3
    optimizer: str = "adam"


@dataclass(frozen=True)
class AeConfig:
    m_count: int = 16
    n: int = 7
    recipe: TrainingRecipe = field(default_factory=TrainingRecipe)


@dataclass(frozen=True)
class EvalConfig:
    ebn0_db: tuple = (0.0, 2.0, 4.0, 6.0, 8.0)
    trials: int = 100_000
    swd_samples: int = 10_000
    swd_projections: int = 128
    s_values: tuple = (100, 50, 20, 10, 5, 2)
    sample_count: int = 1000
    cov_samples: int = 20_000
    bench_batch: int = 4096
    bench_repeats: int = 2


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    channel: ChannelConfig = field(default_factory=lambda: ChannelConfig(kind="awgn"))
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    dm: DmConfig = field(default_factory=DmConfig)
    ae: AeConfig | None = None
    eval: EvalConfig = field(default_factory=EvalConfig)
    raw: dict = field(default_factory=dict, repr=False)

    # -- derived views ------------------------------------------------------

    def block_n(self):
        """Channel block length in reals, from channel/ae sections."""
        ch = self.channel
        if ch.kind in ("sspa", "clarke"):
            return 2 * ch.n_c
        if ch.n is not None:
            return ch.n
        if self.ae is not None:
            return self.ae.n
        raise ConfigError("channel.n is required for awgn/rayleigh without an ae section")

    def build_channel(self):
        """Instantiate the channel model with its noise level resolved."""
        ch = self.channel
        sigma = ch.sigma
        if sigma is None:
            if ch.ebn0_db is None:
                raise ConfigError("channel needs sigma or ebn0_db")
            if self.ae is None:
                raise ConfigError("channel.ebn0_db needs the ae section for the rate")
            sigma = ebn0_to_sigma(ch.ebn0_db, self.ae.m_count, self.ae.n)
        if ch.kind == "awgn":
            return Awgn(sigma=sigma)
        if ch.kind == "rayleigh":
            return Rayleigh(sigma_r=ch.sigma_r, sigma=sigma)
        if ch.kind == "sspa":
            model = Sspa(p=ch.p, a0=ch.a0, v0=ch.v0, sigma=0.0, n_c=ch.n_c)
        else:
            model = Clarke(n_c=ch.n_c, fd_ts=ch.fd_ts, sigma=0.0)
        # sigma was specified per real dimension; complex models store the
        # per-complex total, which with_noise_std converts to.
        return with_noise_std(model, sigma)

    def scaled(self, scale):
        """Divide the large Monte-Carlo counts by `scale` for quick runs."""
        if scale <= 0:
            raise ConfigError("scale must be positive")
        if scale == 1:
            return self

        def cut(v):
            return max(1, int(v // scale))

        dm = replace(
            self.dm,
            dataset_size=cut(self.dm.dataset_size),
            batch_size=min(self.dm.batch_size, cut(self.dm.dataset_size)),
        )
        ev = replace(
            self.eval,
            trials=cut(self.eval.trials),
            swd_samples=cut(self.eval.swd_samples),
            sample_count=cut(self.eval.sample_count),
            cov_samples=cut(self.eval.cov_samples),
        )
        ae = self.ae
        if ae is not None:
            recipe = replace(
                ae.recipe,
                dataset_size=cut(ae.recipe.dataset_size),
                dm_dataset_size=cut(ae.recipe.dm_dataset_size),
                batch_size=min(ae.recipe.batch_size, cut(ae.recipe.dataset_size)),
            )
            ae = replace(ae, recipe=recipe)
        return replace(self, dm=dm, eval=ev, ae=ae)


def parse_config(data):
    """Validate a raw mapping into an ExperimentConfig."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    _reject_unknown(data, ("seed", "channel", "schedule", "dm", "ae", "eval"), "config")
    seed = _need(data, "seed", int, "config", default=0)

    ch_raw = data.get("channel")
    if not isinstance(ch_raw, dict):
        raise ConfigError("channel section is required")
    _reject_unknown(
        ch_raw,
        ("kind", "n", "sigma", "ebn0_db", "sigma_r", "p", "a0", "v0", "n_c", "fd_ts"),
        "channel",
    )
    kind = _need(ch_raw, "kind", str, "channel", required=True)
    if kind not in ("awgn", "rayleigh", "sspa", "clarke"):
        raise ConfigError(f"channel.kind must be awgn/rayleigh/sspa/clarke, got {kind!r}")
    channel = ChannelConfig(
        kind=kind,
        n=_need(ch_raw, "n", int, "channel"),
        sigma=_need(ch_raw, "sigma", float, "channel"),
        ebn0_db=_need(ch_raw, "ebn0_db", float, "channel"),
        sigma_r=_need(ch_raw, "sigma_r", float, "channel", default=1.0),
        p=_need(ch_raw, "p", float, "channel", default=3.0),
        a0=_need(ch_raw, "a0", float, "channel", default=1.5),
        v0=_need(ch_raw, "v0", float, "channel", default=5.0),
        n_c=_need(ch_raw, "n_c", int, "channel", default=4),
        fd_ts=_need(ch_raw, "fd_ts", float, "channel", default=0.01),
    )
    if channel.sigma is not None and channel.sigma < 0:
        raise ConfigError("channel.sigma must be >= 0")
    if channel.n is not None and channel.n < 1:
        raise ConfigError("channel.n must be >= 1")

    sc_raw = data.get("schedule", {})
    _reject_unknown(sc_raw, ("kind", "T", "beta", "variance"), "schedule")
    schedule = ScheduleConfig(
        kind=_need(sc_raw, "kind", str, "schedule", default="cosine"),
        T=_need(sc_raw, "T", int, "schedule", default=100),
        beta=_need(sc_raw, "beta", float, "schedule", default=0.05),
        variance=_need(sc_raw, "variance", str, "schedule", default="posterior"),
    )
    if schedule.kind not in SCHEDULE_KINDS:
        raise ConfigError(f"schedule.kind must be one of {SCHEDULE_KINDS}, got {schedule.kind!r}")
    if schedule.variance not in VARIANCE_KINDS:
        raise ConfigError(f"schedule.variance must be one of {VARIANCE_KINDS}")
    if schedule.T < 1:
        raise ConfigError("schedule.T must be >= 1")
    if not 0 < schedule.beta < 1:
        raise ConfigError("schedule.beta must be in (0, 1)")

    dm_raw = data.get("dm", {})
    _reject_unknown(
        dm_raw,
        ("n_hidden", "mode", "dataset_size", "epochs", "batch_size", "lr", "optimizer"),
        "dm",
    )
    dm = DmConfig(
        n_hidden=_need(dm_raw, "n_hidden", int, "dm", default=110),
        mode=_need(dm_raw, "mode", str, "dm", default="v"),
        dataset_size=_need(dm_raw, "dataset_size", int, "dm", default=100_000),
        epochs=_need(dm_raw, "epochs", int, "dm", default=10),
        batch_size=_need(dm_raw, "batch_size", int, "dm", default=100),
        lr=_need(dm_raw, "lr", float, "dm", default=1e-3),
        optimizer=_need(dm_raw, "optimizer", str, "dm", default="adam"),
    )
    if dm.mode not in PREDICTION_MODES:
        raise ConfigError(f"dm.mode must be one of {PREDICTION_MODES}, got {dm.mode!r}")
    if dm.mode == "epsilon" and schedule.kind == "cosine":
        raise ConfigError("dm.mode=epsilon cannot be sampled on the zero-SNR cosine schedule")
    if min(dm.n_hidden, dm.dataset_size, dm.epochs, dm.batch_size) < 1:
        raise ConfigError("dm counts must be >= 1")
    if dm.lr <= 0:
        raise ConfigError("dm.lr must be > 0")

    ae = None
    if "ae" in data:
        ae_raw = data["ae"]
        known = (
            "m_count", "n", "algorithm", "epochs", "batch_size",
            "dataset_size", "lr", "lr_stages", "optimizer", "sampler", "ddim_steps",
            "alternations", "successive", "dm_epochs", "dm_dataset_size",
            "dm_batch_size", "dm_lr",
        )
        _reject_unknown(ae_raw, known, "ae")
        m_count = _need(ae_raw, "m_count", int, "ae", default=16)
        n = _need(ae_raw, "n", int, "ae", default=7)
        if m_count < 2:
            raise ConfigError("ae.m_count must be >= 2")
        if n < 1:
            raise ConfigError("ae.n must be >= 1")
        algorithm = _need(ae_raw, "algorithm", str, "ae", default="model-aware")
        if algorithm not in ALGORITHMS:
            raise ConfigError(f"ae.algorithm must be one of {ALGORITHMS}, got {algorithm!r}")
        stages_raw = ae_raw.get("lr_stages", [])
        if not isinstance(stages_raw, list):
            raise ConfigError("ae.lr_stages must be a list of [lr, epochs] pairs")
        stages = []
        for i, st in enumerate(stages_raw):
            if not isinstance(st, (list, tuple)) or len(st) != 2:
                raise ConfigError(f"ae.lr_stages[{i}] must be [lr, epochs]")
            stages.append((float(st[0]), int(st[1])))
        try:
            recipe = TrainingRecipe(
                algorithm=algorithm,
                epochs=_need(ae_raw, "epochs", int, "ae", default=10),
                batch_size=_need(ae_raw, "batch_size", int, "ae", default=100),
                dataset_size=_need(ae_raw, "dataset_size", int, "ae", default=100_000),
                lr=_need(ae_raw, "lr", float, "ae", default=1e-3),
                lr_stages=tuple(stages),
                optimizer=_need(ae_raw, "optimizer", str, "ae", default="adam"),
                sampler=_need(ae_raw, "sampler", str, "ae", default="ddim"),
                ddim_steps=_need(ae_raw, "ddim_steps", int, "ae", default=10),
                alternations=_need(ae_raw, "alternations", int, "ae", default=1),
                successive=_need(ae_raw, "successive", bool, "ae", default=False),
                dm_epochs=_need(ae_raw, "dm_epochs", int, "ae", default=2),
                dm_dataset_size=_need(ae_raw, "dm_dataset_size", int, "ae", default=50_000),
                dm_batch_size=_need(ae_raw, "dm_batch_size", int, "ae", default=100),
                dm_lr=_need(ae_raw, "dm_lr", float, "ae", default=1e-3),
            )
        except ValueError as exc:
            raise ConfigError(f"ae: {exc}") from None
        ae = AeConfig(m_count=m_count, n=n, recipe=recipe)

    ev_raw = data.get("eval", {})
    _reject_unknown(
        ev_raw,
        ("ebn0_db", "trials", "swd_samples", "swd_projections", "s_values",
         "sample_count", "cov_samples", "bench_batch", "bench_repeats"),
        "eval",
    )
    ebn0_list = ev_raw.get("ebn0_db", [0.0, 2.0, 4.0, 6.0, 8.0])
    if not isinstance(ebn0_list, list) or not ebn0_list:
        raise ConfigError("eval.ebn0_db must be a non-empty list")
    s_values = ev_raw.get("s_values", [100, 50, 20, 10, 5, 2])
    if not isinstance(s_values, list) or not all(isinstance(s, int) for s in s_values):
        raise ConfigError("eval.s_values must be a list of ints")
    ev = EvalConfig(
        ebn0_db=tuple(float(x) for x in ebn0_list),
        trials=_need(ev_raw, "trials", int, "eval", default=100_000),
        swd_samples=_need(ev_raw, "swd_samples", int, "eval", default=10_000),
        swd_projections=_need(ev_raw, "swd_projections", int, "eval", default=128),
        s_values=tuple(s_values),
        sample_count=_need(ev_raw, "sample_count", int, "eval", default=1000),
        cov_samples=_need(ev_raw, "cov_samples", int, "eval", default=20_000),
        bench_batch=_need(ev_raw, "bench_batch", int, "eval", default=4096),
        bench_repeats=_need(ev_raw, "bench_repeats", int, "eval", default=2),
    )
    if min(ev.trials, ev.swd_samples, ev.swd_projections, ev.sample_count,
           ev.cov_samples, ev.bench_batch) < 1:
        raise ConfigError("eval counts must be >= 1")
    for s in ev.s_values:
        if not 1 <= s <= schedule.T:
            raise ConfigError(f"eval.s_values entry {s} outside [1, T={schedule.T}]")

    cfg = ExperimentConfig(
        seed=seed, channel=channel, schedule=schedule, dm=dm, ae=ae, eval=ev, raw=data,
    )

    # referential checks across sections
    if ae is not None:
        want = 2 * channel.n_c if channel.kind in ("sspa", "clarke") else channel.n
        if want is not None and ae.n != want:
            raise ConfigError(f"ae.n={ae.n} inconsistent with channel block length {want}")
    if channel.kind in ("sspa", "clarke") and channel.n is not None:
        if channel.n != 2 * channel.n_c:
            raise ConfigError(f"channel.n={channel.n} must equal 2*n_c={2 * channel.n_c}")
    return cfg


def load_config(path):
    """Read and validate a YAML experiment file."""
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    with fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    if data is None:
        raise ConfigError(f"{path}: empty config")
    try:
        return parse_config(data)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None
