"""Noise schedules, logSNR helpers, loss weighting and the DSM objective."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike
from scipy.special import expit

from . import gmm as gmm_core
from .rng import RandomStream

T_EPS = 1e-5
_VP_TOL = 1e-9


class ScheduleKind(str, Enum):
    VE_LOG_LINEAR = "ve-log-linear"
    VP_SHIFTED_COSINE = "vp-shifted-cosine"
    LOGSNR_LINEAR = "logsnr-linear"


@dataclass(frozen=True)
class NoiseLevel:
    """A single noise level.

    ``alpha is None`` marks a variance-exploding level (``x + sigma*eps``);
    otherwise the level is variance preserving with ``alpha^2 + sigma^2 = 1``.
    """

    sigma: float
    alpha: float | None = None

    def __post_init__(self):
        if self.alpha is None:
            if not (self.sigma > 0 and math.isfinite(self.sigma)):
                raise ValueError(f"VE sigma must be positive, got {self.sigma}")
        else:
            if not (0 < self.alpha <= 1):
                raise ValueError(f"VP alpha must lie in (0, 1], got {self.alpha}")
            if self.sigma < 0 or abs(self.alpha ** 2 + self.sigma ** 2 - 1.0) > _VP_TOL:
                raise ValueError(f"VP level violates alpha^2 + sigma^2 = 1: ({self.alpha}, {self.sigma})")

    @classmethod
    def ve(cls, sigma: float) -> "NoiseLevel":
        return cls(sigma=float(sigma))

    @classmethod
    def vp(cls, alpha: float, sigma: float) -> "NoiseLevel":
        return cls(sigma=float(sigma), alpha=float(alpha))

    @classmethod
    def vp_from_logsnr(cls, lam: float) -> "NoiseLevel":
        return cls.vp(math.sqrt(expit(lam)), math.sqrt(expit(-lam)))

    @property
    def kind(self) -> str:
        return "VE" if self.alpha is None else "VP"

    @property
    def scale(self) -> float:
        """Signal coefficient; 1 for VE levels."""
        return 1.0 if self.alpha is None else self.alpha


@dataclass(frozen=True)
class ScheduleSpec:
    kind: ScheduleKind = ScheduleKind.VE_LOG_LINEAR
    steps: int = 200
    sigma_init: float = 80.0
    sigma_final: float = 0.005
    shift: float = 0.5
    logsnr_min: float = -8.0
    logsnr_max: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "kind", ScheduleKind(self.kind))
        if int(self.steps) != self.steps or self.steps < 2:
            raise ValueError(f"steps must be an integer >= 2, got {self.steps}")
        if self.kind is ScheduleKind.VE_LOG_LINEAR:
            if not (self.sigma_init > self.sigma_final > 0):
                raise ValueError("VE schedule needs sigma_init > sigma_final > 0")
        elif self.kind is ScheduleKind.VP_SHIFTED_COSINE:
            if not self.shift > 0:
                raise ValueError(f"shift must be positive, got {self.shift}")
        elif not (math.isfinite(self.logsnr_min) and math.isfinite(self.logsnr_max)
                  and self.logsnr_min < self.logsnr_max):
            raise ValueError("logSNR-linear schedule needs finite logsnr_min < logsnr_max")


@dataclass(frozen=True)
class LossWeightSpec:
    bias: float = -2.5

    def __post_init__(self):
        if not math.isfinite(self.bias):
            raise ValueError("bias must be finite")


def _require(spec: ScheduleSpec, kind: ScheduleKind):
    if spec.kind is not kind:
        raise ValueError(f"expected a {kind.value} schedule, got {spec.kind.value}")


def ve_log_linear(spec: ScheduleSpec) -> np.ndarray:
    """sigma_t for t = 0..T, geometric from sigma_init down to sigma_final."""
    _require(spec, ScheduleKind.VE_LOG_LINEAR)
    T = int(spec.steps)
    t = np.arange(T + 1, dtype=float)
    sigmas = np.exp(t / T * math.log(spec.sigma_final) + (T - t) / T * math.log(spec.sigma_init))
    # exp(log(s)) is not always s bit-for-bit
    sigmas[0] = spec.sigma_init
    sigmas[-1] = spec.sigma_final
    return sigmas


def shifted_cosine_logsnr(t: ArrayLike, s: float = 0.5):
    t = np.asarray(t, dtype=float)
    if np.any((t < 0) | (t > 1)) or not np.all(np.isfinite(t)):
        raise ValueError("t must lie in [0, 1]")
    if not s > 0:
        raise ValueError(f"shift must be positive, got {s}")
    t = np.clip(t, T_EPS, 1.0 - T_EPS)
    lam = -2.0 * np.log(np.tan(0.5 * math.pi * t)) + 2.0 * math.log(s)
    return float(lam) if lam.ndim == 0 else lam


def vp_shifted_cosine(t: float, s: float = 0.5) -> NoiseLevel:
    """VP level at continuous time ``t``; t is clamped to [T_EPS, 1 - T_EPS]."""
    return NoiseLevel.vp_from_logsnr(shifted_cosine_logsnr(float(t), s))


def vp_shifted_cosine_schedule(spec: ScheduleSpec) -> list[NoiseLevel]:
    """Levels at t = i/T, i = 0..T (forward time: alpha falls, sigma rises)."""
    _require(spec, ScheduleKind.VP_SHIFTED_COSINE)
    T = int(spec.steps)
    return [vp_shifted_cosine(i / T, spec.shift) for i in range(T + 1)]


def logsnr(level: NoiseLevel) -> float:
    if level.alpha is None:
        return -2.0 * math.log(level.sigma)
    return 2.0 * (math.log(level.alpha) - math.log(level.sigma))


def logsnr_linear_schedule(spec: ScheduleSpec) -> list[NoiseLevel]:
    """T+1 VP levels, high noise first, logSNR an arithmetic sequence."""
    _require(spec, ScheduleKind.LOGSNR_LINEAR)
    lams = np.linspace(spec.logsnr_min, spec.logsnr_max, int(spec.steps) + 1)
    return [NoiseLevel.vp_from_logsnr(float(lam)) for lam in lams]


def sigmoid_weight(lam: ArrayLike, spec: LossWeightSpec = LossWeightSpec()):
    w = expit(spec.bias - np.asarray(lam, dtype=float))
    return float(w) if np.ndim(w) == 0 else w


def _require_vp(level: NoiseLevel):
    if level.alpha is None:
        raise ValueError("velocity parameterization needs a VP noise level")


def velocity_from(x: ArrayLike, eps: ArrayLike, level: NoiseLevel):
    _require_vp(level)
    return level.alpha * np.asarray(eps) - level.sigma * np.asarray(x)


def x_from_velocity(z: ArrayLike, v: ArrayLike, level: NoiseLevel):
    _require_vp(level)
    return level.alpha * np.asarray(z) - level.sigma * np.asarray(v)


def eps_from_velocity(z: ArrayLike, v: ArrayLike, level: NoiseLevel):
    _require_vp(level)
    return level.sigma * np.asarray(z) + level.alpha * np.asarray(v)


def dsm_loss(score_candidate: Callable[[np.ndarray], np.ndarray], target: gmm_core.Gmm1D,
             level: NoiseLevel, n_mc: int, rng: RandomStream,
             weight: LossWeightSpec | None = None) -> float:
    """Monte Carlo denoising score matching loss at one noise level.

    The regression target is the score of q(z_t | x), which for
    ``z_t = alpha x + sigma eps`` is ``-eps / sigma``.
    """
    if int(n_mc) != n_mc or n_mc < 1:
        raise ValueError(f"n_mc must be a positive integer, got {n_mc}")
    if level.sigma <= 0:
        raise ValueError("dsm_loss needs sigma > 0")
    x = gmm_core.sample_gmm(target, rng, int(n_mc))
    eps = rng.standard_normal(int(n_mc))
    z = level.scale * x + level.sigma * eps
    resid = np.asarray(score_candidate(z), dtype=float) + eps / level.sigma
    loss = float(np.mean(resid * resid))
    if weight is not None:
        loss *= sigmoid_weight(logsnr(level), weight)
    return loss
