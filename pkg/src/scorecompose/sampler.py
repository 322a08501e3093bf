"""Reverse-time variance-exploding sampler.

Each sample ``i`` owns the substream ``substream(master_seed, i)``: one
draw for its initial state followed by one draw per transition.  Samples
are processed in fixed-size blocks, so the arithmetic applied to any
sample is the same whether one worker or many handle the batch.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable

import numpy as np

from . import gmm as gmm_core
from . import guidance
from .rng import substream
from .schedules import NoiseLevel, ScheduleKind, ScheduleSpec, ve_log_linear

if TYPE_CHECKING:
    from .scenario import ScenarioSpec

TotalScore = Callable[[np.ndarray, float], np.ndarray]

BLOCK_SIZE = 256
THREADS_ENV = "SCORECOMPOSE_THREADS"


class NonFiniteScoreError(RuntimeError):
    def __init__(self, step: int, sigma: float, x: float, value: float):
        self.step = step
        self.sigma = sigma
        self.x = x
        self.value = value
        super().__init__(f"non-finite score {value} at step {step} (sigma={sigma:g}, x={x!r})")


@dataclass(frozen=True)
class SamplerConfig:
    schedule: ScheduleSpec = field(default_factory=ScheduleSpec)
    n_samples: int = 5000
    master_seed: int = 1
    record_trajectories: bool = False
    terminal_noise: bool = False

    def __post_init__(self):
        if int(self.n_samples) != self.n_samples or self.n_samples < 1:
            raise ValueError(f"n_samples must be a positive integer, got {self.n_samples}")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError(f"master_seed must be a 64-bit unsigned integer, got {self.master_seed}")


@dataclass
class SampleBatch:
    values: np.ndarray
    trajectories: np.ndarray | None = None  # shape (T + 1, n_samples)


def worker_count(requested: int | None = None) -> int:
    n = requested
    if n is None:
        env = os.environ.get(THREADS_ENV)
        n = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(n))


def _block_draws(master_seed: int, start: int, stop: int, steps: int, sigma0: float):
    init = np.empty(stop - start)
    noise = np.empty((steps, stop - start))
    for j, i in enumerate(range(start, stop)):
        draws = substream(master_seed, i).standard_normal(steps + 1)
        init[j] = sigma0 * draws[0]
        noise[:, j] = draws[1:]
    return init, noise


def _run_block(total_score: TotalScore, sigmas: np.ndarray, config: SamplerConfig,
               start: int, stop: int):
    T = len(sigmas) - 1
    x, noise = _block_draws(config.master_seed, start, stop, T, sigmas[0])
    traj = None
    if config.record_trajectories:
        traj = np.empty((T + 1, stop - start))
        traj[0] = x
    for t in range(T):
        s_t, s_next = sigmas[t], sigmas[t + 1]
        step = s_t * s_t - s_next * s_next
        s = np.asarray(total_score(x, s_t), dtype=float)
        bad = ~np.isfinite(s)
        if bad.any():
            j = int(np.argmax(bad))
            raise NonFiniteScoreError(t, float(s_t), float(x[j]), float(s[j]))
        x = x + step * s
        if t < T - 1 or config.terminal_noise:
            x = x + math.sqrt(step) * noise[t]
        if traj is not None:
            traj[t + 1] = x
    return x, traj


def ve_reverse_sample(total_score: TotalScore, config: SamplerConfig,
                      workers: int | None = None) -> SampleBatch:
    """Integrate the reverse VE update over the configured log-linear schedule.

    ``total_score(x, sigma_t)`` must be vectorised over ``x`` and safe to call
    from several threads.  The final transition is noise-free unless
    ``config.terminal_noise`` is set.
    """
    if config.schedule.kind is not ScheduleKind.VE_LOG_LINEAR:
        raise ValueError("ve_reverse_sample needs a ve-log-linear schedule")
    sigmas = ve_log_linear(config.schedule)
    bounds = [(a, min(a + BLOCK_SIZE, config.n_samples))
              for a in range(0, config.n_samples, BLOCK_SIZE)]

    def work(b):
        return _run_block(total_score, sigmas, config, *b)

    n_workers = min(worker_count(workers), len(bounds))
    if n_workers == 1:
        parts = [work(b) for b in bounds]
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            parts = list(pool.map(work, bounds))

    values = np.concatenate([p[0] for p in parts])
    traj = None
    if config.record_trajectories:
        traj = np.concatenate([p[1] for p in parts], axis=1)
    return SampleBatch(values=values, trajectories=traj)


def make_total_score(scenario: "ScenarioSpec", strategy: guidance.GuidanceStrategy) -> TotalScore:
    """Bind a guidance strategy to the scenario's analytic score models.

    Every model is evaluated at the diffused noise level ``sigma_t`` the
    sampler passes in.
    """
    from .scenario import derive_enhancement_model

    enh = derive_enhancement_model(scenario)
    prior = scenario.tts_prior
    y = scenario.target_component
    if not 0 <= y < len(prior):
        raise IndexError(f"target component {y} out of range")

    def s_enh(x, sigma_t):
        return -(x - enh.mean) / (enh.var + sigma_t * sigma_t)

    if isinstance(strategy, guidance.NoGuidance):
        return s_enh

    if isinstance(strategy, guidance.ScoreAverage):
        alpha = strategy.alpha

        def total(x, sigma_t):
            cond = gmm_core.conditional_score(prior, x, sigma_t, y)
            return guidance.score_average(s_enh(x, sigma_t), cond, alpha)
        return total

    if isinstance(strategy, guidance.TcCfg):
        scale = strategy.guidance_scale

        def total(x, sigma_t):
            base = s_enh(x, sigma_t)
            level = NoiseLevel.ve(sigma_t)
            cond = gmm_core.conditional_score(prior, x, sigma_t, y)
            uncond = gmm_core.score(prior, x, sigma_t)
            return guidance.apply_gate(strategy, level, guidance.tc_cfg(base, cond, uncond, scale), base)
        return total

    if isinstance(strategy, guidance.AnalyticPosterior):
        scale = strategy.guidance_scale

        def total(x, sigma_t):
            base = s_enh(x, sigma_t)
            level = NoiseLevel.ve(sigma_t)
            grad = gmm_core.posterior_guidance_score(prior, x, sigma_t, y)
            return guidance.apply_gate(strategy, level,
                                       guidance.analytic_posterior_guided(base, grad, scale), base)
        return total

    raise TypeError(f"unknown guidance strategy {strategy!r}")
