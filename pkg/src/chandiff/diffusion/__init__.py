"""Conditional denoising diffusion: schedules, the denoiser network,
forward/reverse processes, and training."""

from dataclasses import dataclass

from .denoiser import DenoiserNet
from .sampling import (
    PREDICTION_MODES,
    SAMPLER_KINDS,
    check_mode,
    check_mode_schedule,
    ddim_step,
    ddpm_step,
    forward_sample,
    make_trajectory,
    recover_x0_eps,
    sample,
    velocity_target,
)
from .schedule import SCHEDULE_KINDS, VARIANCE_KINDS, NoiseSchedule, make_schedule
from .training import DmTrainConfig, loss_conditional, train_dm


@dataclass
class DiffusionModel:
    """A trained denoiser bundled with its schedule and prediction mode."""

    net: DenoiserNet
    sched: NoiseSchedule
    mode: str

    def sample(self, sampler, c, rng, **kw):
        return sample(self.sched, self.net, self.mode, sampler, c, rng, **kw)


__all__ = [
    "PREDICTION_MODES",
    "SAMPLER_KINDS",
    "SCHEDULE_KINDS",
    "VARIANCE_KINDS",
    "DenoiserNet",
    "DiffusionModel",
    "DmTrainConfig",
    "NoiseSchedule",
    "check_mode",
    "check_mode_schedule",
    "ddim_step",
    "ddpm_step",
    "forward_sample",
    "loss_conditional",
    "make_schedule",
    "make_trajectory",
    "recover_x0_eps",
    "sample",
    "train_dm",
    "velocity_target",
]
