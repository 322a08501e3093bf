"""Run configuration: a strict JSON document mirroring :class:`ScenarioSpec`.

Every field defaults to the reference guidance-comparison setup, so ``{}``
is a complete config.  Unknown keys are rejected.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from . import guidance
from .gmm import Gmm1D
from .metrics import MIN_BINNED_SAMPLES, HistogramSpec
from .sampler import SamplerConfig
from .scenario import ScenarioSpec
from .schedules import ScheduleSpec

OutputFormat = Literal["summary-json", "samples-csv", "histogram-csv", "trajectories-csv"]


class ConfigError(ValueError):
    """Raised for unreadable or invalid run configs; the message names the field."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PriorConfig(_Strict):
    means: list[float] = [-4.0, 4.0]
    stds: list[float] = [0.9, 0.9]
    weights: list[float] = [0.5, 0.5]


class GateConfig(_Strict):
    threshold: float = -1.0


class NoGuidanceConfig(_Strict):
    name: Literal["no_guidance"] = "no_guidance"


class ScoreAverageConfig(_Strict):
    name: Literal["score_average"] = "score_average"
    alpha: float = 0.5


class TcCfgConfig(_Strict):
    name: Literal["tc_cfg"] = "tc_cfg"
    guidance_scale: float = 1e4
    gate: GateConfig | None = None


class AnalyticPosteriorConfig(_Strict):
    name: Literal["analytic_posterior"] = "analytic_posterior"
    guidance_scale: float = 1e4
    gate: GateConfig | None = None


StrategyConfig = Annotated[
    Union[NoGuidanceConfig, ScoreAverageConfig, TcCfgConfig, AnalyticPosteriorConfig],
    Field(discriminator="name"),
]


class SamplerSection(_Strict):
    n_samples: int = 5000
    steps: int = 200
    sigma_init: float = 80.0
    sigma_final: float = 0.005
    seed: int = 1
    terminal_noise: bool = False
    record_trajectories: bool = False


class HistogramSection(_Strict):
    bin_count: int = 200
    range_lo: float | None = None
    range_hi: float | None = None
    epsilon: float = 1e-12


def _default_strategies() -> list:
    return [NoGuidanceConfig(), TcCfgConfig(), ScoreAverageConfig()]


class RunConfig(_Strict):
    tts_prior: PriorConfig = PriorConfig()
    target_component: int = 0
    delta_mu: float = 2.0
    var_reduction: float = 4.0
    model_bias: float = 0.4
    var_inflation: float = 1.8
    sampler: SamplerSection = SamplerSection()
    strategies: list[StrategyConfig] = Field(default_factory=_default_strategies)
    histogram: HistogramSection = HistogramSection()
    output_dir: str = "results"
    formats: list[OutputFormat] = ["summary-json", "samples-csv", "histogram-csv"]

    def to_scenario(self) -> ScenarioSpec:
        """Build the domain objects, mapping their validation errors to :class:`ConfigError`."""
        names = [s.name for s in self.strategies]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise ConfigError(f"strategies: duplicate strategy name(s) {', '.join(dupes)}")
        try:
            prior = Gmm1D.from_arrays(self.tts_prior.means, self.tts_prior.stds, self.tts_prior.weights)
        except ValueError as exc:
            raise ConfigError(f"tts_prior: {exc}") from exc
        s = self.sampler
        if s.n_samples < MIN_BINNED_SAMPLES:
            raise ConfigError(f"sampler.n_samples: need at least {MIN_BINNED_SAMPLES} samples "
                              f"for the binned KL, got {s.n_samples}")
        try:
            sampler = SamplerConfig(
                schedule=ScheduleSpec(steps=s.steps, sigma_init=s.sigma_init, sigma_final=s.sigma_final),
                n_samples=s.n_samples,
                master_seed=s.seed,
                record_trajectories=s.record_trajectories or "trajectories-csv" in self.formats,
                terminal_noise=s.terminal_noise,
            )
        except ValueError as exc:
            raise ConfigError(f"sampler: {exc}") from exc
        try:
            strategies = tuple(_strategy(c) for c in self.strategies)
        except ValueError as exc:
            raise ConfigError(f"strategies: {exc}") from exc
        try:
            hist = HistogramSpec(**self.histogram.model_dump())
        except ValueError as exc:
            raise ConfigError(f"histogram: {exc}") from exc
        try:
            return ScenarioSpec(
                tts_prior=prior,
                target_component=self.target_component,
                delta_mu=self.delta_mu,
                var_reduction=self.var_reduction,
                model_bias=self.model_bias,
                var_inflation=self.var_inflation,
                sampler=sampler,
                strategies=strategies,
                histogram=hist,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def dumps(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"


def _strategy(cfg) -> guidance.GuidanceStrategy:
    if isinstance(cfg, NoGuidanceConfig):
        return guidance.NoGuidance()
    if isinstance(cfg, ScoreAverageConfig):
        return guidance.ScoreAverage(alpha=cfg.alpha)
    gate = None if cfg.gate is None else guidance.LogSnrGate(cfg.gate.threshold)
    cls = guidance.TcCfg if isinstance(cfg, TcCfgConfig) else guidance.AnalyticPosterior
    return cls(guidance_scale=cfg.guidance_scale, gate=gate)


def strategy_config(strategy: guidance.GuidanceStrategy):
    """Inverse of the config -> strategy mapping, used when echoing parameters."""
    if isinstance(strategy, guidance.NoGuidance):
        return NoGuidanceConfig()
    if isinstance(strategy, guidance.ScoreAverage):
        return ScoreAverageConfig(alpha=strategy.alpha)
    gate = None if strategy.gate is None else GateConfig(threshold=strategy.gate.threshold)
    cls = TcCfgConfig if isinstance(strategy, guidance.TcCfg) else AnalyticPosteriorConfig
    return cls(guidance_scale=strategy.guidance_scale, gate=gate)


def _format_validation_error(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        parts.append(f"{loc}: {err['msg']}")
    return "invalid config: " + "; ".join(parts)


def parse_config(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_validation_error(exc)) from None


def load_config(path: str | Path | None) -> RunConfig:
    """Read a config file; ``None`` gives the built-in defaults."""
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    return parse_config(data)
