"""The guidance-comparison toy simulation.

A bimodal "TTS" prior supplies content information, an ideal enhanced
distribution is derived from its target component, and a biased, wider
enhancement model is what the sampler actually follows.  Each guidance
strategy composes the enhancement score with prior information and the
resulting samples are scored against the ideal distribution.

All strategies sample with the same per-sample noise streams (common
random numbers): strategies whose composed score collapses to the
enhancement score reproduce the unguided samples bit-for-bit, and adding,
removing or reordering strategies never changes anyone else's samples.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Sequence

from . import guidance
from .gmm import GaussianComponent, Gmm1D
from .metrics import HistogramSpec, binned_kl, gaussian_fit_kl, moments
from .sampler import (NonFiniteScoreError, SampleBatch, SamplerConfig, make_total_score,
                      ve_reverse_sample)
from .schedules import ScheduleSpec


def _appendix_prior() -> Gmm1D:
    return Gmm1D.from_arrays(means=[-4.0, 4.0], stds=[0.9, 0.9], weights=[0.5, 0.5])


def _appendix_strategies() -> tuple[guidance.GuidanceStrategy, ...]:
    return (guidance.NoGuidance(), guidance.TcCfg(guidance_scale=1e4), guidance.ScoreAverage(alpha=0.5))


@dataclass(frozen=True)
class ScenarioSpec:
    tts_prior: Gmm1D = field(default_factory=_appendix_prior)
    target_component: int = 0
    delta_mu: float = 2.0
    var_reduction: float = 4.0
    model_bias: float = 0.4
    var_inflation: float = 1.8
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    strategies: tuple[guidance.GuidanceStrategy, ...] = field(default_factory=_appendix_strategies)
    histogram: HistogramSpec = field(default_factory=HistogramSpec)

    def __post_init__(self):
        object.__setattr__(self, "strategies", tuple(self.strategies))
        if not 0 <= self.target_component < len(self.tts_prior):
            raise ValueError(f"target_component {self.target_component} out of range")
        if not self.var_reduction >= 1:
            raise ValueError(f"var_reduction must be >= 1, got {self.var_reduction}")
        if not self.var_inflation > 0:
            raise ValueError(f"var_inflation must be positive, got {self.var_inflation}")

    def with_seed(self, seed: int) -> "ScenarioSpec":
        return replace(self, sampler=replace(self.sampler, master_seed=seed))


class SimulationError(RuntimeError):
    def __init__(self, strategy: str, cause: NonFiniteScoreError):
        self.strategy = strategy
        self.step = cause.step
        super().__init__(f"strategy {strategy}: {cause}")


@dataclass
class StrategyResult:
    strategy: guidance.GuidanceStrategy
    samples: SampleBatch
    mean: float
    std: float
    kl_binned: float
    kl_gauss_fit: float
    wall_time: float  # seconds
    seed: int

    @property
    def name(self) -> str:
        return self.strategy.name


@dataclass
class SweepRow:
    strategy: str
    parameter_name: str
    parameter_value: float
    result: StrategyResult


def build_appendix_scenario(seed: int = 1) -> ScenarioSpec:
    """The guidance-comparison configuration: 5000 samples, 200 steps, sigma 80 -> 0.005."""
    return ScenarioSpec(
        sampler=SamplerConfig(
            schedule=ScheduleSpec(steps=200, sigma_init=80.0, sigma_final=0.005),
            n_samples=5000,
            master_seed=seed,
        ),
    )


def derive_true_enhanced(spec: ScenarioSpec) -> GaussianComponent:
    c = spec.tts_prior.components[spec.target_component]
    return GaussianComponent(c.mean + spec.delta_mu, c.std / spec.var_reduction, 1.0)


def derive_enhancement_model(spec: ScenarioSpec) -> GaussianComponent:
    c = spec.tts_prior.components[spec.target_component]
    return GaussianComponent(c.mean + spec.delta_mu + spec.model_bias,
                             spec.var_inflation * c.std / spec.var_reduction, 1.0)


def run_strategy(spec: ScenarioSpec, strategy: guidance.GuidanceStrategy,
                 workers: int | None = None) -> StrategyResult:
    reference = derive_true_enhanced(spec)
    total_score = make_total_score(spec, strategy)
    start = time.perf_counter()
    try:
        batch = ve_reverse_sample(total_score, spec.sampler, workers=workers)
    except NonFiniteScoreError as exc:
        raise SimulationError(strategy.name, exc) from exc
    elapsed = time.perf_counter() - start
    mean, std = moments(batch.values)
    return StrategyResult(
        strategy=strategy,
        samples=batch,
        mean=mean,
        std=std,
        kl_binned=binned_kl(batch.values, reference, spec.histogram),
        kl_gauss_fit=gaussian_fit_kl(batch.values, reference),
        wall_time=elapsed,
        seed=spec.sampler.master_seed,
    )


def run(spec: ScenarioSpec, workers: int | None = None) -> list[StrategyResult]:
    """Sample every strategy in ``spec.strategies`` and score it."""
    return [run_strategy(spec, s, workers) for s in spec.strategies]


def sweep(spec: ScenarioSpec, scales: Sequence[float] = (), alphas: Sequence[float] = (),
          workers: int | None = None) -> list[SweepRow]:
    """TC-CFG over ``scales`` then score averaging over ``alphas``."""
    if not scales and not alphas:
        raise ValueError("sweep needs at least one guidance scale or alpha")
    cells: list[guidance.GuidanceStrategy] = [guidance.TcCfg(guidance_scale=float(s)) for s in scales]
    cells += [guidance.ScoreAverage(alpha=float(a)) for a in alphas]
    rows = []
    for strategy in cells:
        pname, pvalue = guidance.strategy_parameter(strategy)
        rows.append(SweepRow(strategy.name, pname, pvalue, run_strategy(spec, strategy, workers)))
    return rows
