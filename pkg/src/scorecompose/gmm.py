"""Closed-form quantities for one-dimensional Gaussian mixtures.

Everything here is exact: densities, scores, diffused marginals and
component posteriors are evaluated analytically in log-space.  Functions
accept a scalar or an array for ``x`` and broadcast over it; the mixture
component axis is always the trailing one internally.

A mixture diffused by a variance-exploding kernel ``x + sigma_t * eps``
keeps its means and weights and adds ``sigma_t**2`` to every component
variance.  Most functions take ``sigma_t`` directly so the diffused
mixture never has to be materialised; ``sigma_t = 0`` means undiffused.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike
from scipy.special import logsumexp

from .rng import RandomStream

_LOG_2PI = math.log(2.0 * math.pi)
_WEIGHT_TOL = 1e-12
_VP_TOL = 1e-9


@dataclass(frozen=True)
class GaussianComponent:
    mean: float
    std: float
    weight: float = 1.0

    def __post_init__(self):
        if not math.isfinite(self.mean):
            raise ValueError(f"component mean must be finite, got {self.mean}")
        if not (self.std > 0 and math.isfinite(self.std)):
            raise ValueError(f"component std must be positive, got {self.std}")
        if not (0 < self.weight <= 1):
            raise ValueError(f"component weight must lie in (0, 1], got {self.weight}")

    @property
    def var(self) -> float:
        return self.std * self.std


@dataclass(frozen=True)
class Gmm1D:
    """Ordered mixture of Gaussian components; index ``k`` identifies the component."""

    components: tuple[GaussianComponent, ...]

    def __post_init__(self):
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        if not comps:
            raise ValueError("a mixture needs at least one component")
        total = math.fsum(c.weight for c in comps)
        if abs(total - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"component weights must sum to 1, got {total!r}")

    @classmethod
    def from_arrays(cls, means: Sequence[float], stds: Sequence[float],
                    weights: Sequence[float] | None = None) -> "Gmm1D":
        if len(means) != len(stds):
            raise ValueError("means and stds must have equal length")
        if weights is None:
            weights = [1.0 / len(means)] * len(means)
        if len(weights) != len(means):
            raise ValueError("weights must match the number of components")
        return cls(tuple(GaussianComponent(float(m), float(s), float(w))
                         for m, s, w in zip(means, stds, weights)))

    @classmethod
    def single(cls, mean: float, std: float) -> "Gmm1D":
        return cls((GaussianComponent(mean, std, 1.0),))

    def __len__(self) -> int:
        return len(self.components)

    @cached_property
    def means(self) -> np.ndarray:
        return np.array([c.mean for c in self.components])

    @cached_property
    def variances(self) -> np.ndarray:
        return np.array([c.var for c in self.components])

    @cached_property
    def log_weights(self) -> np.ndarray:
        return np.log(np.array([c.weight for c in self.components]))

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)


def _as_finite(x: ArrayLike) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("x must be finite")
    return arr


def _check_sigma(sigma_t: float) -> float:
    sigma_t = float(sigma_t)
    if not (sigma_t >= 0 and math.isfinite(sigma_t)):
        raise ValueError(f"sigma_t must be a finite non-negative number, got {sigma_t}")
    return sigma_t


def _check_index(gmm: Gmm1D, k: int) -> int:
    if not (0 <= k < len(gmm)):
        raise IndexError(f"component index {k} out of range for a {len(gmm)}-component mixture")
    return k


def _unwrap(arr: np.ndarray):
    return float(arr) if arr.ndim == 0 else arr


def _joint_log_terms(gmm: Gmm1D, x: np.ndarray, sigma_t: float):
    """Per-component ``log w_k + log N(x; mu_k, var_k + sigma_t^2)`` and the variances."""
    var = gmm.variances + sigma_t * sigma_t
    diff = x[..., None] - gmm.means
    terms = gmm.log_weights - 0.5 * (_LOG_2PI + np.log(var)) - 0.5 * diff * diff / var
    return terms, diff, var


def _responsibilities(terms: np.ndarray) -> np.ndarray:
    return np.exp(terms - logsumexp(terms, axis=-1, keepdims=True))


def log_density(gmm: Gmm1D, x: ArrayLike, sigma_t: float = 0.0):
    """log of the (optionally diffused) mixture density at ``x``."""
    x = _as_finite(x)
    terms, _, _ = _joint_log_terms(gmm, x, _check_sigma(sigma_t))
    return _unwrap(logsumexp(terms, axis=-1))


def density(gmm: Gmm1D, x: ArrayLike, sigma_t: float = 0.0):
    return _unwrap(np.exp(np.asarray(log_density(gmm, x, sigma_t))))


def score(gmm: Gmm1D, x: ArrayLike, sigma_t: float = 0.0):
    """d/dx log p(x), for the mixture diffused to ``sigma_t``."""
    x = _as_finite(x)
    terms, diff, var = _joint_log_terms(gmm, x, _check_sigma(sigma_t))
    r = _responsibilities(terms)
    return _unwrap(np.sum(r * (-diff / var), axis=-1))


def diffuse_ve(gmm: Gmm1D, sigma_t: float) -> Gmm1D:
    """Marginal of ``x + sigma_t * eps`` with ``x ~ gmm``."""
    if not (sigma_t > 0 and math.isfinite(sigma_t)):
        raise ValueError(f"sigma_t must be positive, got {sigma_t}")
    return Gmm1D(tuple(
        GaussianComponent(c.mean, math.sqrt(c.var + sigma_t * sigma_t), c.weight)
        for c in gmm.components))


def diffuse_vp(gmm: Gmm1D, alpha_t: float, sigma_t: float) -> Gmm1D:
    """Marginal of ``alpha_t * x + sigma_t * eps`` under the variance-preserving kernel."""
    if not (0 < alpha_t <= 1):
        raise ValueError(f"alpha_t must lie in (0, 1], got {alpha_t}")
    if abs(alpha_t * alpha_t + sigma_t * sigma_t - 1.0) > _VP_TOL:
        raise ValueError(f"alpha_t^2 + sigma_t^2 must equal 1, got {alpha_t**2 + sigma_t**2!r}")
    return Gmm1D(tuple(
        GaussianComponent(alpha_t * c.mean,
                          math.sqrt(alpha_t * alpha_t * c.var + sigma_t * sigma_t),
                          c.weight)
        for c in gmm.components))


def component_posterior(gmm: Gmm1D, x: ArrayLike, sigma_t: float = 0.0) -> np.ndarray:
    """p(k | x_t) for every component; trailing axis indexes components."""
    x = _as_finite(x)
    terms, _, _ = _joint_log_terms(gmm, x, _check_sigma(sigma_t))
    return _responsibilities(terms)


def log_component_posterior(gmm: Gmm1D, x: ArrayLike, sigma_t: float, k: int):
    x = _as_finite(x)
    _check_index(gmm, k)
    terms, _, _ = _joint_log_terms(gmm, x, _check_sigma(sigma_t))
    return _unwrap(terms[..., k] - logsumexp(terms, axis=-1))


def conditional_score(gmm: Gmm1D, x: ArrayLike, sigma_t: float, k: int):
    """Score of the k-th component alone, diffused to ``sigma_t``."""
    x = _as_finite(x)
    _check_index(gmm, k)
    sigma_t = _check_sigma(sigma_t)
    c = gmm.components[k]
    return _unwrap(-(x - c.mean) / (c.var + sigma_t * sigma_t))


def posterior_guidance_score(gmm: Gmm1D, x: ArrayLike, sigma_t: float, k: int):
    """d/dx log p(k | x_t).

    Evaluated as ``sum_{j != k} r_j (s_k - s_j)`` rather than
    ``s_k - sum_j r_j s_j``: both equal the conditional minus marginal
    score, but the first keeps full relative precision when ``r_k -> 1``,
    which matters once the result is scaled by a large guidance strength.
    """
    x = _as_finite(x)
    _check_index(gmm, k)
    terms, diff, var = _joint_log_terms(gmm, x, _check_sigma(sigma_t))
    r = _responsibilities(terms)
    comp_scores = -diff / var
    gaps = comp_scores[..., k:k + 1] - comp_scores
    return _unwrap(np.sum(r * gaps, axis=-1))


def sample_gmm(gmm: Gmm1D, rng: RandomStream, size: int | None = None):
    """Ancestral draw: component by weight, then a Gaussian variate."""
    n = 1 if size is None else int(size)
    k = rng.choice(len(gmm), size=n, p=gmm.weights / gmm.weights.sum())
    eps = rng.standard_normal(n)
    out = gmm.means[k] + np.sqrt(gmm.variances[k]) * eps
    return float(out[0]) if size is None else out
