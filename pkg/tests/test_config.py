"""Config parsing: field-path errors, referential checks, scaling."""

import math

import numpy as np
import pytest

from chandiff.channels import Awgn, Clarke, Rayleigh, Sspa, ebn0_to_sigma
from chandiff.config import load_config, parse_config
from chandiff.errors import ConfigError


def _base(**extra):
    data = {"channel": {"kind": "awgn", "n": 2, "sigma": 0.3}}
    data.update(extra)
    return data


def test_minimal_config_fills_defaults():
    cfg = parse_config(_base())
    assert cfg.seed == 0
    assert cfg.channel.kind == "awgn"
    assert cfg.schedule.kind == "cosine" and cfg.schedule.T == 100
    assert cfg.dm.mode == "v" and cfg.dm.n_hidden == 110
    assert cfg.ae is None
    assert cfg.eval.swd_projections == 128
    assert cfg.raw == _base()


def test_root_must_be_mapping():
    with pytest.raises(ConfigError, match="root must be a mapping"):
        parse_config([1, 2])


def test_unknown_root_key_rejected():
    with pytest.raises(ConfigError, match="unknown key\\(s\\) under config: extra"):
        parse_config(_base(extra=1))


def test_channel_section_required():
    with pytest.raises(ConfigError, match="channel section is required"):
        parse_config({"seed": 1})


def test_channel_kind_required_and_validated():
    with pytest.raises(ConfigError, match="channel.kind is required"):
        parse_config({"channel": {"n": 2, "sigma": 0.3}})
    with pytest.raises(ConfigError, match="channel.kind must be"):
        parse_config({"channel": {"kind": "laplace", "n": 2, "sigma": 0.3}})


def test_wrong_type_reports_field_path():
    with pytest.raises(ConfigError, match="channel.sigma must be float"):
        parse_config({"channel": {"kind": "awgn", "n": 2, "sigma": "big"}})
    with pytest.raises(ConfigError, match="config.seed must be int"):
        parse_config(_base(seed="zero"))


def test_bool_is_not_an_int():
    with pytest.raises(ConfigError, match="config.seed must be int"):
        parse_config(_base(seed=True))


def test_int_promotes_to_float():
    cfg = parse_config({"channel": {"kind": "awgn", "n": 2, "sigma": 1}})
    assert isinstance(cfg.channel.sigma, float) and cfg.channel.sigma == 1.0


def test_negative_sigma_rejected():
    with pytest.raises(ConfigError, match="channel.sigma must be >= 0"):
        parse_config({"channel": {"kind": "awgn", "n": 2, "sigma": -0.1}})


def test_schedule_validation():
    with pytest.raises(ConfigError, match="unknown key\\(s\\) under schedule"):
        parse_config(_base(schedule={"betas": 0.1}))
    with pytest.raises(ConfigError, match="schedule.kind must be one of"):
        parse_config(_base(schedule={"kind": "linear"}))
    with pytest.raises(ConfigError, match="schedule.variance must be one of"):
        parse_config(_base(schedule={"variance": "learned"}))
    with pytest.raises(ConfigError, match="schedule.T must be >= 1"):
        parse_config(_base(schedule={"T": 0}))
    with pytest.raises(ConfigError, match="schedule.beta must be in"):
        parse_config(_base(schedule={"kind": "constant", "beta": 1.5}))


def test_epsilon_mode_incompatible_with_cosine():
    with pytest.raises(ConfigError, match="zero-SNR cosine"):
        parse_config(_base(dm={"mode": "epsilon"}))
    cfg = parse_config(_base(dm={"mode": "epsilon"},
                             schedule={"kind": "constant", "beta": 0.05}))
    assert cfg.dm.mode == "epsilon"


def test_dm_bounds():
    with pytest.raises(ConfigError, match="dm.mode must be one of"):
        parse_config(_base(dm={"mode": "x0"}))
    with pytest.raises(ConfigError, match="dm counts must be >= 1"):
        parse_config(_base(dm={"epochs": 0}))
    with pytest.raises(ConfigError, match="dm.lr must be > 0"):
        parse_config(_base(dm={"lr": 0.0}))


def test_ae_section_parses_recipe():
    cfg = parse_config(_base(ae={
        "m_count": 4, "n": 2, "algorithm": "iterative", "epochs": 3,
        "lr_stages": [[1e-3, 2], [1e-4, 1]], "alternations": 2,
    }))
    r = cfg.ae.recipe
    assert cfg.ae.m_count == 4 and cfg.ae.n == 2
    assert r.algorithm == "iterative" and r.alternations == 2
    assert r.lr_stages == ((1e-3, 2), (1e-4, 1))


def test_ae_validation():
    with pytest.raises(ConfigError, match="ae.m_count must be >= 2"):
        parse_config(_base(ae={"m_count": 1, "n": 2}))
    with pytest.raises(ConfigError, match="ae.algorithm must be one of"):
        parse_config(_base(ae={"n": 2, "m_count": 4, "algorithm": "magic"}))
    with pytest.raises(ConfigError, match="lr_stages\\[0\\] must be"):
        parse_config(_base(ae={"n": 2, "m_count": 4, "lr_stages": [[1e-3]]}))
    with pytest.raises(ConfigError, match="^ae: "):
        parse_config(_base(ae={"n": 2, "m_count": 4, "epochs": 0}))


def test_eval_validation():
    with pytest.raises(ConfigError, match="eval.ebn0_db must be a non-empty list"):
        parse_config(_base(eval={"ebn0_db": []}))
    with pytest.raises(ConfigError, match="eval.s_values must be a list of ints"):
        parse_config(_base(eval={"s_values": [10, 2.5]}))
    with pytest.raises(ConfigError, match="outside \\[1, T=100\\]"):
        parse_config(_base(eval={"s_values": [101]}))
    with pytest.raises(ConfigError, match="eval counts must be >= 1"):
        parse_config(_base(eval={"trials": 0}))


def test_ae_block_length_must_match_channel():
    with pytest.raises(ConfigError, match="ae.n=3 inconsistent with channel block length 2"):
        parse_config(_base(ae={"m_count": 4, "n": 3}))
    data = {"channel": {"kind": "sspa", "n_c": 4}, "ae": {"m_count": 4, "n": 7}}
    with pytest.raises(ConfigError, match="ae.n=7 inconsistent with channel block length 8"):
        parse_config(data)


def test_complex_channel_n_must_be_twice_n_c():
    data = {"channel": {"kind": "clarke", "n_c": 4, "n": 6, "sigma": 0.1}}
    with pytest.raises(ConfigError, match="must equal 2\\*n_c=8"):
        parse_config(data)
    ok = parse_config({"channel": {"kind": "clarke", "n_c": 4, "n": 8, "sigma": 0.1}})
    assert ok.block_n() == 8


def test_block_n_resolution():
    assert parse_config(_base()).block_n() == 2
    cfg = parse_config({"channel": {"kind": "sspa", "n_c": 3, "sigma": 0.1}})
    assert cfg.block_n() == 6
    cfg = parse_config({"channel": {"kind": "awgn", "sigma": 0.3},
                        "ae": {"m_count": 4, "n": 2}})
    assert cfg.block_n() == 2
    bare = parse_config({"channel": {"kind": "awgn", "sigma": 0.3}})
    with pytest.raises(ConfigError, match="channel.n is required"):
        bare.block_n()


def test_build_channel_sigma_path():
    ch = parse_config(_base()).build_channel()
    assert isinstance(ch, Awgn) and ch.sigma == 0.3
    ch = parse_config({"channel": {"kind": "rayleigh", "n": 2, "sigma": 0.2,
                                   "sigma_r": 1.5}}).build_channel()
    assert isinstance(ch, Rayleigh) and ch.sigma_r == 1.5 and ch.sigma == 0.2


def test_build_channel_complex_sigma_is_per_real():
    cfg = parse_config({"channel": {"kind": "sspa", "n_c": 2, "sigma": 0.1,
                                    "p": 3.0, "a0": 1.5, "v0": 5.0}})
    ch = cfg.build_channel()
    assert isinstance(ch, Sspa)
    assert math.isclose(ch.sigma, 0.1 * math.sqrt(2.0))
    cfg = parse_config({"channel": {"kind": "clarke", "n_c": 2, "sigma": 0.0,
                                    "fd_ts": 0.05}})
    ch = cfg.build_channel()
    assert isinstance(ch, Clarke) and ch.fd_ts == 0.05 and ch.sigma == 0.0


def test_build_channel_ebn0_path():
    data = {"channel": {"kind": "awgn", "n": 2, "ebn0_db": 5.0},
            "ae": {"m_count": 4, "n": 2}}
    ch = parse_config(data).build_channel()
    assert math.isclose(ch.sigma, ebn0_to_sigma(5.0, 4, 2))


def test_build_channel_ebn0_without_ae_rejected():
    cfg = parse_config({"channel": {"kind": "awgn", "n": 2, "ebn0_db": 5.0}})
    with pytest.raises(ConfigError, match="needs the ae section"):
        cfg.build_channel()


def test_build_channel_without_noise_level_rejected():
    cfg = parse_config({"channel": {"kind": "awgn", "n": 2}})
    with pytest.raises(ConfigError, match="sigma or ebn0_db"):
        cfg.build_channel()


def test_scaled_divides_counts():
    cfg = parse_config(_base(
        dm={"dataset_size": 1000, "batch_size": 100},
        ae={"m_count": 4, "n": 2, "dataset_size": 900, "batch_size": 300,
            "dm_dataset_size": 800},
        eval={"trials": 5000, "swd_samples": 700, "sample_count": 50,
              "cov_samples": 600},
    ))
    small = cfg.scaled(10)
    assert small.dm.dataset_size == 100 and small.dm.batch_size == 100
    assert small.eval.trials == 500 and small.eval.swd_samples == 70
    assert small.eval.sample_count == 5 and small.eval.cov_samples == 60
    assert small.ae.recipe.dataset_size == 90
    assert small.ae.recipe.batch_size == 90  # clamped to dataset
    assert small.ae.recipe.dm_dataset_size == 80
    assert small.eval.swd_projections == cfg.eval.swd_projections  # untouched


def test_scaled_floors_at_one_and_validates():
    cfg = parse_config(_base(eval={"sample_count": 3}))
    assert cfg.scaled(1000).eval.sample_count == 1
    assert cfg.scaled(1) is cfg
    with pytest.raises(ConfigError, match="scale must be positive"):
        cfg.scaled(0)


def test_load_config_yaml_round_trip(tmp_path):
    path = tmp_path / "exp.yaml"
    path.write_text(
        "seed: 3\n"
        "channel: {kind: awgn, n: 2, sigma: 0.3}\n"
        "schedule: {kind: cosine, T: 50}\n"
        "eval: {s_values: [50, 10]}\n"
    )
    cfg = load_config(path)
    assert cfg.seed == 3 and cfg.schedule.T == 50
    assert cfg.eval.s_values == (50, 10)


def test_load_config_errors_carry_path(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("channel: {kind: nope}\n")
    with pytest.raises(ConfigError, match="bad.yaml.*channel.kind"):
        load_config(path)
    empty = tmp_path / "empty.yaml"
    empty.write_text("")
    with pytest.raises(ConfigError, match="empty config"):
        load_config(empty)
    broken = tmp_path / "broken.yaml"
    broken.write_text("channel: [unclosed\n")
    with pytest.raises(ConfigError, match="invalid YAML"):
        load_config(broken)


def test_shipped_configs_parse():
    import pathlib
    root = pathlib.Path(__file__).resolve().parents[1] / "configs"
    files = sorted(root.glob("*.yaml"))
    assert files, "no shipped configs found"
    for f in files:
        cfg = load_config(f)
        cfg.build_channel()
        cfg.block_n()
