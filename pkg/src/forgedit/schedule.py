"""Noise schedule: the monotone alpha_t sequence driving forward/reverse diffusion.

Convention: alphas[t] is the cumulative signal retention at timestep t,
with alphas[0] = 1 (clean image) and alphas[T] = 0 (pure noise), strictly
decreasing in between.  The default family is the cosine shape

    f(t) = cos^2(((t/T + s) / (1 + s)) * pi/2),   alphas[t] = f(t) / f(0)

which hits both endpoints up to floating tolerance and stays strictly
monotone for any T.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError

ENDPOINT_TOL = 1e-6


@dataclass(frozen=True)
class NoiseSchedule:
    alphas: np.ndarray  # shape (T+1,), float64
    T: int = field(init=False)

    def __post_init__(self):
        alphas = np.asarray(self.alphas, dtype=np.float64)
        if alphas.ndim != 1 or alphas.size < 2:
            raise ArgumentError("alphas must be a 1-d sequence of length T+1 >= 2")
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "T", alphas.size - 1)
        if abs(alphas[0] - 1.0) > ENDPOINT_TOL:
            raise ArgumentError(f"alphas[0] must be 1, got {alphas[0]!r}")
        if abs(alphas[-1]) > ENDPOINT_TOL:
            raise ArgumentError(f"alphas[T] must be 0, got {alphas[-1]!r}")
        if not np.all(np.diff(alphas) < 0):
            raise ArgumentError("alphas must be strictly decreasing")

    @classmethod
    def cosine(cls, T: int = 100, s: float = 0.008) -> "NoiseSchedule":
        if T < 1:
            raise ArgumentError("T must be positive")
        t = np.arange(T + 1, dtype=np.float64)
        f = np.cos(((t / T) + s) / (1.0 + s) * (math.pi / 2.0)) ** 2
        return cls(f / f[0])

    def alpha(self, t: int) -> float:
        """Alpha value at integer timestep t, bounds-checked."""
        if not 0 <= t <= self.T:
            raise ArgumentError(f"timestep {t} outside [0, {self.T}]")
        return float(self.alphas[t])

    def ddim_timesteps(self, steps: int = 50) -> list[int]:
        """Descending sub-sequence of timesteps for deterministic sampling.

        Spans T-1 (where alpha is still positive) down to 0.  `steps` pairs
        (t, t_prev) are produced by zipping consecutive entries.
        """
        if not 1 <= steps <= self.T:
            raise ArgumentError(f"steps must be in [1, {self.T}]")
        ts = np.linspace(0, self.T - 1, steps + 1)
        seq = sorted(set(int(round(v)) for v in ts), reverse=True)
        return seq
