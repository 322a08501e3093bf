"""Score composition strategies.

The combinators work on score *values* (floats or arrays).  Which model
produced a value, and when, is the sampler's business.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

from .schedules import NoiseLevel, logsnr


@dataclass(frozen=True)
class LogSnrGate:
    """Enable the composed score only where logSNR exceeds ``threshold``."""

    threshold: float = -1.0

    def __post_init__(self):
        if not math.isfinite(self.threshold):
            raise ValueError("gate threshold must be finite")

    def is_open(self, level: NoiseLevel) -> bool:
        return logsnr(level) > self.threshold


def _check_scale(scale: float):
    if not (scale >= 0 and math.isfinite(scale)):
        raise ValueError(f"guidance_scale must be finite and >= 0, got {scale}")


@dataclass(frozen=True)
class NoGuidance:
    name = "no_guidance"


@dataclass(frozen=True)
class ScoreAverage:
    alpha: float = 0.5
    name = "score_average"

    def __post_init__(self):
        if not 0 <= self.alpha <= 1:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")


@dataclass(frozen=True)
class TcCfg:
    guidance_scale: float = 1e4
    gate: LogSnrGate | None = None
    name = "tc_cfg"

    def __post_init__(self):
        _check_scale(self.guidance_scale)


@dataclass(frozen=True)
class AnalyticPosterior:
    guidance_scale: float = 1e4
    gate: LogSnrGate | None = None
    name = "analytic_posterior"

    def __post_init__(self):
        _check_scale(self.guidance_scale)


GuidanceStrategy = Union[NoGuidance, ScoreAverage, TcCfg, AnalyticPosterior]

STRATEGY_TYPES = {cls.name: cls for cls in (NoGuidance, ScoreAverage, TcCfg, AnalyticPosterior)}


def strategy_parameter(strategy: GuidanceStrategy) -> tuple[str, float] | None:
    """The strategy's scalar knob as ``(name, value)``, if it has one."""
    if isinstance(strategy, ScoreAverage):
        return "alpha", strategy.alpha
    if isinstance(strategy, (TcCfg, AnalyticPosterior)):
        return "guidance_scale", strategy.guidance_scale
    return None


def score_average(s_enh, s_tts_cond, alpha: float):
    if not 0 <= alpha <= 1:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    return (1.0 - alpha) * s_enh + alpha * s_tts_cond


def cfg(s_cond, s_uncond, scale: float):
    """Classifier-free guidance: ``s_uncond + scale * (s_cond - s_uncond)``."""
    _check_scale(scale)
    if scale == 1.0:
        return s_cond
    return s_uncond + scale * (s_cond - s_uncond)


def tc_cfg(s_enh, s_tts_cond, s_tts_uncond, scale: float):
    """Enhancement score plus a scaled conditional/unconditional TTS score gap."""
    _check_scale(scale)
    return s_enh + scale * (s_tts_cond - s_tts_uncond)


def analytic_posterior_guided(s_enh, guidance_grad, scale: float):
    """Enhancement score plus a scaled exact ``d/dx log p(k | x_t)``."""
    _check_scale(scale)
    return s_enh + scale * guidance_grad


def apply_gate(strategy: GuidanceStrategy, level: NoiseLevel, composed, base):
    """Hard switch between the composed and base score on the strategy's gate."""
    gate = getattr(strategy, "gate", None)
    if gate is None or gate.is_open(level):
        return composed
    return base
