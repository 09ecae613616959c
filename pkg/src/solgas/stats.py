"""Small statistics helpers: Gaussian fits, normality, power laws, bootstrap."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .errors import Degenerate, NonPositiveInput, TooFewSamples

MIN_NORMALITY_SAMPLES = 30


@dataclass(frozen=True)
class GaussianFit:
    mean: float
    sigma: float

    @property
    def degenerate(self) -> bool:
        return self.sigma == 0.0


@dataclass(frozen=True)
class PowerLawFit:
    """``sigma ~ constant * N**(-alpha)``."""

    alpha: float
    constant: float
    r_squared: float


def _real_samples(samples, minimum: int) -> np.ndarray:
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < minimum:
        raise TooFewSamples(f"need at least {minimum} samples, got {x.size}")
    return x


def gaussian_fit(samples) -> GaussianFit:
    """Maximum-likelihood mean and (population) standard deviation."""
    x = _real_samples(samples, 2)
    mean = float(x.mean())
    sigma = float(np.sqrt(np.mean((x - mean) ** 2)))
    return GaussianFit(mean, sigma)


def _ad_pvalue(a2_star: float) -> float:
    # D'Agostino & Stephens (1986), Table 4.9: normal, mean and variance estimated
    if a2_star >= 0.6:
        p = math.exp(1.2937 - 5.709 * a2_star + 0.0186 * a2_star**2)
    elif a2_star >= 0.34:
        p = math.exp(0.9177 - 4.279 * a2_star - 1.38 * a2_star**2)
    elif a2_star >= 0.2:
        p = 1.0 - math.exp(-8.318 + 42.796 * a2_star - 59.938 * a2_star**2)
    else:
        p = 1.0 - math.exp(-13.436 + 101.14 * a2_star - 223.73 * a2_star**2)
    return min(max(p, 0.0), 1.0)


def anderson_darling(samples) -> tuple[float, float]:
    """Return ``(A^2, p_value)`` for normality with estimated mean and variance."""
    x = _real_samples(samples, MIN_NORMALITY_SAMPLES)
    if np.ptp(x) == 0.0:
        raise Degenerate("constant samples have no normal fit")
    a2 = float(sps.anderson(x, dist="norm").statistic)
    n = x.size
    a2_star = a2 * (1.0 + 0.75 / n + 2.25 / n**2)
    return a2, _ad_pvalue(a2_star)


def normality_test(samples) -> float:
    """Anderson-Darling p-value against the fitted normal."""
    return anderson_darling(samples)[1]


def power_law_fit(ns, sigmas) -> PowerLawFit:
    """Least squares on ``log sigma = log c - alpha log N``."""
    n = np.asarray(ns, dtype=float).ravel()
    s = np.asarray(sigmas, dtype=float).ravel()
    if n.size != s.size:
        raise ValueError(f"{n.size} sizes but {s.size} sigmas")
    if n.size < 3:
        raise TooFewSamples("power-law fit needs at least 3 points")
    if np.any(~(n > 0)) or np.any(~(s > 0)):
        raise NonPositiveInput("sizes and sigmas must be positive")
    lx, ly = np.log(n), np.log(s)
    slope, intercept = np.polyfit(lx, ly, 1)
    return PowerLawFit(float(-slope), float(math.exp(intercept)), _r_squared(lx, ly, slope, intercept))


def log_linear_fit(ns, values) -> tuple[float, float, float]:
    """Fit ``values = q + p log N``; returns ``(p, q, r_squared)``."""
    n = np.asarray(ns, dtype=float).ravel()
    y = np.asarray(values, dtype=float).ravel()
    if n.size != y.size:
        raise ValueError(f"{n.size} sizes but {y.size} values")
    if n.size < 2:
        raise TooFewSamples("log-linear fit needs at least 2 points")
    if np.any(~(n > 0)):
        raise NonPositiveInput("sizes must be positive")
    lx = np.log(n)
    p, q = np.polyfit(lx, y, 1)
    return float(p), float(q), _r_squared(lx, y, p, q)


def _r_squared(x, y, slope, intercept) -> float:
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        return 1.0
    ss_res = float(np.sum((y - (slope * x + intercept)) ** 2))
    return min(max(1.0 - ss_res / ss_tot, 0.0), 1.0)


def complex_scatter(values) -> float:
    """Root-mean-square deviation of complex samples from their mean."""
    v = np.asarray(values, dtype=complex).ravel()
    if v.size < 2:
        raise TooFewSamples("scatter needs at least 2 samples")
    return float(np.sqrt(np.mean(np.abs(v - v.mean()) ** 2)))


def bootstrap_stderr(values, statistic=complex_scatter, resamples: int = 500,
                     seed: int = 0) -> float:
    """Bootstrap standard error of ``statistic`` over ``values``."""
    v = np.asarray(values)
    if v.shape[0] < 2:
        raise TooFewSamples("bootstrap needs at least 2 samples")
    rng = np.random.Generator(np.random.PCG64(seed))
    idx = rng.integers(0, v.shape[0], size=(resamples, v.shape[0]))
    reps = np.array([statistic(v[row]) for row in idx])
    return float(reps.std(ddof=1))
