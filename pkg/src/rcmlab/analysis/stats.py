"""Regression and testing helpers shared by the suites."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    slope_se: float
    r2: float
    n: int


def linear_fit(x, y) -> LinearFit:
    """Ordinary least squares ``y = a + b x``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) < 2 or np.ptp(x) == 0:
        return LinearFit(math.nan, math.nan, math.inf, math.nan, len(x))
    if len(x) == 2:
        b = (y[1] - y[0]) / (x[1] - x[0])
        return LinearFit(float(b), float(y[0] - b * x[0]), math.inf, 1.0, 2)
    r = stats.linregress(x, y)
    return LinearFit(float(r.slope), float(r.intercept), float(r.stderr), float(r.rvalue**2), len(x))


def loglog_fit(x, y) -> LinearFit:
    """Power-law exponent by regressing ``log y`` on ``log x`` (non-positive y dropped)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    keep = (x > 0) & (y > 0)
    return linear_fit(np.log(x[keep]), np.log(y[keep]))


def bootstrap_se(samples: np.ndarray, statistic, n_boot: int = 200, seed: int = 0) -> float:
    """Bootstrap standard error of ``statistic`` over the rows of ``samples``."""
    samples = np.asarray(samples)
    n = samples.shape[0]
    if n < 2:
        return math.inf
    gen = np.random.default_rng(seed)
    vals = np.empty(n_boot)
    for b in range(n_boot):
        vals[b] = statistic(samples[gen.integers(0, n, n)])
    return float(np.std(vals, ddof=1))


def mean_se(x, axis: int = 0):
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[axis]
    m = x.mean(axis=axis)
    if n < 2:
        return m, np.full_like(m, math.inf)
    return m, x.std(axis=axis, ddof=1) / math.sqrt(n)


def ks_normal(samples, var: float):
    """KS test of ``samples`` against N(0, var); returns ``(D, p)``."""
    r = stats.kstest(np.asarray(samples, dtype=np.float64) / math.sqrt(var), "norm")
    return float(r.statistic), float(r.pvalue)


def ks_exponential(samples):
    r = stats.kstest(np.asarray(samples, dtype=np.float64), "expon")
    return float(r.statistic), float(r.pvalue)


def correlation_se(a, b):
    """Pearson correlation with its large-sample standard error ``(1 - r^2)/sqrt(n)``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n = len(a)
    if n < 3 or a.std() == 0 or b.std() == 0:
        return 0.0, math.inf
    r = float(np.corrcoef(a, b)[0, 1])
    return r, (1 - r * r) / math.sqrt(n)


def strictly_decreasing(v) -> bool:
    v = np.asarray(v, dtype=np.float64)
    return bool(np.all(np.diff(v) < 0))


def spread_ratio(v) -> float:
    """``max / min`` of positive values; inf when any value is not positive or finite."""
    v = np.asarray(v, dtype=np.float64)
    if len(v) == 0 or np.any(~np.isfinite(v)) or np.any(v <= 0):
        return math.inf
    return float(v.max() / v.min())
