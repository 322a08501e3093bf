"""Diffusion score composition on analytically tractable 1D Gaussian mixtures."""

from .gmm import GaussianComponent, Gmm1D
from .guidance import AnalyticPosterior, LogSnrGate, NoGuidance, ScoreAverage, TcCfg
from .sampler import SampleBatch, SamplerConfig, make_total_score, ve_reverse_sample
from .scenario import (ScenarioSpec, build_appendix_scenario, derive_enhancement_model,
                       derive_true_enhanced, run, sweep)
from .schedules import LossWeightSpec, NoiseLevel, ScheduleKind, ScheduleSpec

__version__ = "0.1.0"
