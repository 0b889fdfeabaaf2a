"""Core diffusion math: forward noising, deterministic reverse step, training
loss, and classifier-free guidance combination.

Formulas (all elementwise, alpha values from a NoiseSchedule):

    forward:   x_t = sqrt(a_t) * x0 + sqrt(1 - a_t) * eps
    reverse:   x_prev = sqrt(a_prev)/sqrt(a_t) * (x_t - sqrt(1 - a_t) * eps_hat)
                        + sqrt(1 - a_prev) * eps_hat
    loss:      mean squared error between true and predicted noise
    guidance:  eps_u + scale * (eps_c - eps_u)

All functions are pure, operate on float64 numpy arrays, and are safe to
call concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ArgumentError, SingularScheduleError
from .schedule import NoiseSchedule

# Minimum working alpha inside ddim_step; guards the a_T = 0 endpoint without
# touching the schedule itself.
ALPHA_FLOOR = 1e-5


@dataclass(frozen=True)
class LatentImage:
    """A clean or noisy latent array (C, H, W); values must be finite."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if not np.all(np.isfinite(data)):
            raise ArgumentError("latent contains non-finite values")
        object.__setattr__(self, "data", data)

    @property
    def shape(self) -> tuple:
        return self.data.shape


@dataclass(frozen=True)
class NoiseSample:
    """A Gaussian noise array together with the seed that produced it."""

    data: np.ndarray
    seed: int

    @classmethod
    def draw(cls, seed: int, shape: tuple) -> "NoiseSample":
        rng = np.random.default_rng(seed)
        return cls(rng.standard_normal(shape), seed)


def _as_array(x) -> np.ndarray:
    if isinstance(x, (LatentImage, NoiseSample)):
        x = x.data
    return np.asarray(x, dtype=np.float64)


def _check_same_shape(a: np.ndarray, b: np.ndarray, what: str) -> None:
    if a.shape != b.shape:
        raise ArgumentError(f"{what}: shape mismatch {a.shape} vs {b.shape}")


def add_noise(x0, eps, t: int, sched: NoiseSchedule) -> np.ndarray:
    """Forward diffusion: directly produce x_t from the clean sample."""
    x0 = _as_array(x0)
    eps = _as_array(eps)
    _check_same_shape(x0, eps, "add_noise")
    a = sched.alpha(t)
    return math.sqrt(a) * x0 + math.sqrt(1.0 - a) * eps


def ddim_step(
    xt,
    eps_hat,
    t: int,
    t_prev: int,
    sched: NoiseSchedule,
    alpha_floor: float = ALPHA_FLOOR,
) -> np.ndarray:
    """One deterministic reverse step from timestep t to t_prev < t.

    `alpha_floor` clamps the working alpha at t so the step stays finite when
    started from the pure-noise endpoint; pass 0 to disable clamping, in which
    case alpha_t = 0 raises SingularScheduleError.
    """
    xt = _as_array(xt)
    eps_hat = _as_array(eps_hat)
    _check_same_shape(xt, eps_hat, "ddim_step")
    if not t_prev < t:
        raise ArgumentError(f"t_prev={t_prev} must be < t={t}")
    a_t = sched.alpha(t)
    a_prev = sched.alpha(t_prev)
    if alpha_floor > 0:
        a_t = max(a_t, alpha_floor)
    elif a_t <= 0.0:
        raise SingularScheduleError(f"alpha_t = 0 at t={t}; reverse step undefined")
    ratio = math.sqrt(a_prev) / math.sqrt(a_t)
    return ratio * (xt - math.sqrt(1.0 - a_t) * eps_hat) + math.sqrt(1.0 - a_prev) * eps_hat


def training_loss(eps_true, eps_pred) -> float:
    """Mean squared error over all elements."""
    eps_true = _as_array(eps_true)
    eps_pred = _as_array(eps_pred)
    _check_same_shape(eps_true, eps_pred, "training_loss")
    diff = eps_pred - eps_true
    return float(np.mean(diff * diff))


def cfg_combine(eps_uncond, eps_cond, scale: float) -> np.ndarray:
    """Classifier-free guidance: eps_u + scale * (eps_c - eps_u).

    The scale = 0 and scale = 1 endpoints return the respective input exactly
    (bitwise), so a zero-scale trajectory is identical to an unconditional one.
    """
    eps_uncond = _as_array(eps_uncond)
    eps_cond = _as_array(eps_cond)
    _check_same_shape(eps_uncond, eps_cond, "cfg_combine")
    if scale == 0.0:
        return eps_uncond.copy()
    if scale == 1.0:
        return eps_cond.copy()
    return eps_uncond + scale * (eps_cond - eps_uncond)


def ddim_sample(
    eps_fn: Callable[[np.ndarray, int], np.ndarray],
    shape: tuple,
    seed: int,
    sched: NoiseSchedule,
    steps: int = 50,
) -> np.ndarray:
    """Full deterministic trajectory from seeded noise down to t = 0.

    `eps_fn(x, t)` supplies the noise prediction (guidance included by the
    caller).  Bit-identical across runs for fixed (eps_fn, seed, steps).
    """
    x = NoiseSample.draw(seed, shape).data
    seq = sched.ddim_timesteps(steps)
    for t, t_prev in zip(seq[:-1], seq[1:]):
        x = ddim_step(x, eps_fn(x, t), t, t_prev, sched)
    return x
