"""Comparisons between empirical samples and a Gaussian reference."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike
from scipy.special import ndtr

from .gmm import GaussianComponent

MIN_BINNED_SAMPLES = 100


@dataclass(frozen=True)
class HistogramSpec:
    """Binning for :func:`binned_kl`.

    With no explicit range the bins span the reference mean +/- 8 reference
    std, widened to cover every sample.
    """

    bin_count: int = 200
    range_lo: float | None = None
    range_hi: float | None = None
    epsilon: float = 1e-12

    def __post_init__(self):
        if int(self.bin_count) != self.bin_count or self.bin_count < 2:
            raise ValueError(f"bin_count must be an integer >= 2, got {self.bin_count}")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if (self.range_lo is not None and self.range_hi is not None
                and not self.range_lo < self.range_hi):
            raise ValueError("range_lo must be below range_hi")


@dataclass
class Histogram:
    edges: np.ndarray
    empirical_mass: np.ndarray
    reference_mass: np.ndarray


def moments(samples: ArrayLike) -> tuple[float, float]:
    """Sample mean and the 1/(N-1) standard deviation."""
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise ValueError("moments needs at least 2 samples")
    return float(np.mean(x)), float(np.std(x, ddof=1))


def gaussian_kl(mean_p: float, std_p: float, mean_q: float, std_q: float) -> float:
    """KL(N(mean_p, std_p^2) || N(mean_q, std_q^2)) in nats."""
    d = mean_p - mean_q
    return math.log(std_q / std_p) + (std_p * std_p + d * d) / (2.0 * std_q * std_q) - 0.5


def histogram(samples: ArrayLike, reference: GaussianComponent,
              spec: HistogramSpec = HistogramSpec()) -> Histogram:
    """Smoothed, renormalised empirical and reference bin masses.

    Samples outside the range fall into the edge bins.  Reference masses
    are exact CDF differences over the same bins.
    """
    x = np.asarray(samples, dtype=float)
    if x.size == 0 or not np.all(np.isfinite(x)):
        raise ValueError("samples must be a non-empty finite array")
    lo, hi = spec.range_lo, spec.range_hi
    if lo is None:
        lo = min(reference.mean - 8.0 * reference.std, float(x.min()))
    if hi is None:
        hi = max(reference.mean + 8.0 * reference.std, float(x.max()))
    if not lo < hi:
        raise ValueError(f"degenerate histogram range [{lo}, {hi}]")
    edges = np.linspace(lo, hi, spec.bin_count + 1)

    idx = np.searchsorted(edges, x, side="right") - 1
    idx = np.clip(idx, 0, spec.bin_count - 1)
    counts = np.bincount(idx, minlength=spec.bin_count).astype(float)
    p = counts / x.size + spec.epsilon
    p /= p.sum()

    z = (edges - reference.mean) / reference.std
    # upper-tail bins via the survival function to avoid 1 - 1 cancellation
    q = np.where(z[:-1] < 0, ndtr(z[1:]) - ndtr(z[:-1]), ndtr(-z[:-1]) - ndtr(-z[1:]))
    q = q + spec.epsilon
    q /= q.sum()
    return Histogram(edges=edges, empirical_mass=p, reference_mass=q)


def binned_kl(samples: ArrayLike, reference: GaussianComponent,
              spec: HistogramSpec = HistogramSpec()) -> float:
    """Histogram estimate of KL(empirical || reference) in nats."""
    if np.size(samples) < MIN_BINNED_SAMPLES:
        raise ValueError(f"binned_kl needs at least {MIN_BINNED_SAMPLES} samples")
    h = histogram(samples, reference, spec)
    p, q = h.empirical_mass, h.reference_mass
    return float(np.sum(p * (np.log(p) - np.log(q))))


def gaussian_fit_kl(samples: ArrayLike, reference: GaussianComponent) -> float:
    """KL from a moment-matched Gaussian fit of ``samples`` to the reference."""
    mean, std = moments(samples)
    if std == 0:
        raise ValueError("gaussian_fit_kl needs samples with non-zero spread")
    return gaussian_kl(mean, std, reference.mean, reference.std)
