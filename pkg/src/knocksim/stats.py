"""Statistical primitives: autocorrelation, ECDF, histograms, fit metrics.

These serve two roles: diagnosing whether per-condition KI behaves like an
i.i.d. sequence (autocorrelation against white-noise bands), and scoring
how well a model's distribution matches data (fitting error on cumulative
or relative-frequency curves, Kolmogorov-Smirnov statistic).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri


@dataclass(frozen=True)
class Ecdf:
    """Right-continuous empirical CDF, steps of 1/n at each sorted sample."""

    sorted_points: np.ndarray

    def __post_init__(self):
        pts = np.sort(np.asarray(self.sorted_points, dtype=np.float64))
        pts.flags.writeable = False
        object.__setattr__(self, "sorted_points", pts)

    @property
    def n(self) -> int:
        return self.sorted_points.size

    def __call__(self, x):
        """F(x) = (#samples <= x) / n, vectorized."""
        idx = np.searchsorted(self.sorted_points, x, side="right")
        return idx / self.n


@dataclass(frozen=True)
class Histogram:
    """Relative-frequency histogram over contiguous equal-width bins."""

    bin_edges: np.ndarray
    rel_freq: np.ndarray


@dataclass(frozen=True)
class GroupErrorSummary:
    """Mean error over groups with an empirical confidence band."""

    mean: float
    lo: float
    hi: float
    n_groups: int


def autocorrelation(series, k: int) -> float:
    """Lag-k autocorrelation r(k) of a cycle series.

    r(k) = sum_{i=1..n-k} (x_i - mean)(x_{i+k} - mean)
           / sum_{i=1..n} (x_i - mean)^2

    with the mean taken over the whole series; r(0) = 1 identically.
    """
    x = np.asarray(series, dtype=np.float64)
    n = x.size
    if k < 0:
        raise ValueError("lag must be >= 0")
    if k >= n:
        raise ValueError(f"lag {k} requires series longer than {k}")
    centered = x - x.mean()
    denom = float(np.sum(centered * centered))
    if denom == 0.0:
        raise ValueError("zero variance: series is constant")
    if k == 0:
        return 1.0
    num = float(np.sum(centered[: n - k] * centered[k:]))
    return num / denom


def white_noise_band(n: int, level: float = 0.95) -> float:
    """Half-width of the white-noise probability band for r(k), k >= 1.

    Under the i.i.d. hypothesis, sample autocorrelations are approximately
    N(0, 1/n), so the band is z_{(1+level)/2} / sqrt(n).
    """
    if n < 2:
        raise ValueError("need n >= 2")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0, 1), got {level}")
    return float(ndtri((1.0 + level) / 2.0)) / math.sqrt(n)


def ecdf(samples) -> Ecdf:
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty sample set")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples must be finite")
    return Ecdf(x)


def rel_freq_histogram(samples, n_bins: int, rng: tuple[float, float]) -> Histogram:
    """Equal-width relative-frequency histogram over [lo, hi].

    Bins are left-closed, the last bin is closed on both sides; samples
    outside the range are counted in the nearest edge bin.
    """
    lo, hi = float(rng[0]), float(rng[1])
    if n_bins < 1:
        raise ValueError("need at least one bin")
    if not lo < hi:
        raise ValueError("range must satisfy lo < hi")
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty sample set")
    counts, edges = np.histogram(np.clip(x, lo, hi), bins=n_bins, range=(lo, hi))
    return Histogram(bin_edges=edges, rel_freq=counts / x.size)


def fitting_error(o, o_hat) -> float:
    """Root of the summed squared gaps, sqrt(sum_i (o_i - o_hat_i)^2).

    No normalization by the number of points: two curves compared on more
    evaluation points can only accumulate error.
    """
    a = np.asarray(o, dtype=np.float64)
    b = np.asarray(o_hat, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise ValueError("inputs must be equal-length non-empty sequences")
    d = a - b
    return float(np.sqrt(np.sum(d * d)))


def ks_statistic(samples, reference) -> float:
    """Exact sup-gap between the sample ECDF and a reference CDF.

    ``reference`` is either an :class:`Ecdf` (two-sample form, evaluated at
    the union of jump points) or a callable CDF (both one-sided gaps are
    checked at every sample jump, so the supremum over the step function is
    attained exactly).
    """
    x = np.sort(np.asarray(samples, dtype=np.float64))
    n = x.size
    if n == 0:
        raise ValueError("empty sample set")
    f_emp = Ecdf(x)
    if isinstance(reference, Ecdf):
        pts = np.union1d(x, reference.sorted_points)
        return float(np.max(np.abs(f_emp(pts) - reference(pts))))
    ref = np.asarray(reference(x), dtype=np.float64)
    hi = np.arange(1, n + 1) / n   # F_emp at each jump
    lo = np.arange(0, n) / n       # F_emp just below each jump
    return float(max(np.max(np.abs(ref - hi)), np.max(np.abs(ref - lo))))


def group_error_summary(errors, level: float = 0.99) -> GroupErrorSummary:
    """Mean and empirical percentile interval of per-group errors.

    The interval is the linear-interpolation percentile at (1-level)/2 and
    (1+level)/2 over the groups (numpy's default percentile rule),
    distribution-free by construction.
    """
    e = np.asarray(errors, dtype=np.float64)
    if e.size < 2:
        raise ValueError("need at least two groups")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0, 1), got {level}")
    lo, hi = np.percentile(e, [50 * (1 - level), 50 * (1 + level)])
    return GroupErrorSummary(
        mean=float(e.mean()), lo=float(lo), hi=float(hi), n_groups=e.size
    )
