"""Synthetic ground truth: a known conditional mixture family on a grid.

Real cycle-resolved knock databases are proprietary, so the test bench and
examples run on data drawn from a closed-form two-kernel family whose
parameters move smoothly with the operating condition.  Because the family
is known exactly, every downstream estimate (EM fits, network predictions,
simulated sequences) can be scored against an exact CDF instead of another
estimate.

The family is deliberately bimodal — a single Gaussian is provably
misspecified on it — and advancing injection timing shifts mass to the
right (higher weight on the upper kernel and a higher upper center), the
qualitative behavior seen on real engines.  The coefficients below are
frozen constants of the package, not tunables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Dataset, KnockRecord, OperatingPoint
from .mixture import MixtureParams, cdf, sample_ancestral
from .rng import RandomStream, stream_id_for


def _logistic(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@dataclass(frozen=True)
class GroundTruthFamily:
    """Coefficients of the closed-form condition-to-mixture maps.

    Conditions are centered and scaled to s = (speed-1400)/600,
    q = (pressure-5.5)/2.5, f = fit/3 before the maps apply.
    """

    speed_center: float = 1400.0
    speed_scale: float = 600.0
    pressure_center: float = 5.5
    pressure_scale: float = 2.5
    fit_scale: float = 3.0
    weight_base: float = 0.15
    weight_span: float = 0.7
    weight_fit: float = 1.8
    weight_pressure: float = 0.9
    weight_speed: float = 0.3
    mu1_base: float = 0.5
    mu1_pressure: float = 0.10
    mu1_speed: float = 0.05
    sigma1: float = 0.15
    mu2_base: float = 1.5
    mu2_fit: float = 0.8
    mu2_pressure: float = 0.5
    mu2_speed: float = 0.2
    sigma2_base: float = 0.35
    sigma2_fit: float = 0.10

    def scaled(self, u: OperatingPoint) -> tuple[float, float, float]:
        return (
            (u.speed - self.speed_center) / self.speed_scale,
            (u.manifold_pressure - self.pressure_center) / self.pressure_scale,
            u.fit / self.fit_scale,
        )

    def params(self, u: OperatingPoint) -> MixtureParams:
        s, q, f = self.scaled(u)
        w2 = self.weight_base + self.weight_span * _logistic(
            self.weight_fit * f + self.weight_pressure * q + self.weight_speed * s
        )
        mu1 = self.mu1_base + self.mu1_pressure * q + self.mu1_speed * s
        mu2 = self.mu2_base + self.mu2_fit * f + self.mu2_pressure * q + self.mu2_speed * s
        sg2 = self.sigma2_base + self.sigma2_fit * _logistic(f)
        return MixtureParams(
            weights=np.array([1.0 - w2, w2]),
            means=np.array([mu1, mu2]),
            sigmas=np.array([self.sigma1, sg2]),
        )

    def mean(self, u: OperatingPoint) -> float:
        p = self.params(u)
        return float(np.dot(p.weights, p.means))


DEFAULT_FAMILY = GroundTruthFamily()


@dataclass(frozen=True)
class GridSpec:
    """Rectangular condition grid plus per-condition recording protocol."""

    speeds: tuple[float, ...] = (800.0, 1200.0, 1600.0, 2000.0)
    pressures: tuple[float, ...] = (3.0, 4.0, 5.0, 6.0, 7.0, 8.0)
    fits: tuple[float, ...] = (-4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0)
    cycles_per_record: int = 300
    records_per_condition: int = 3
    seed: int = 0

    def __post_init__(self):
        for name in ("speeds", "pressures", "fits"):
            vals = tuple(float(v) for v in getattr(self, name))
            if not vals:
                raise ValueError(f"{name} must be non-empty")
            object.__setattr__(self, name, vals)
        if self.cycles_per_record < 1:
            raise ValueError("cycles_per_record must be >= 1")
        if self.records_per_condition < 1:
            raise ValueError("records_per_condition must be >= 1")

    def conditions(self) -> tuple[OperatingPoint, ...]:
        """Grid points in canonical order: speed slowest, fit fastest."""
        return tuple(
            OperatingPoint(s, p, f)
            for s in self.speeds
            for p in self.pressures
            for f in self.fits
        )

    @property
    def n_conditions(self) -> int:
        return len(self.speeds) * len(self.pressures) * len(self.fits)


def default_grid(seed: int = 0) -> GridSpec:
    """Full 4 x 6 x 7 grid, 3 records of 300 cycles per condition."""
    return GridSpec(seed=seed)


def true_params(u: OperatingPoint, family: GroundTruthFamily = DEFAULT_FAMILY) -> MixtureParams:
    """Exact mixture parameters of the ground-truth family at a condition."""
    return family.params(u)


def true_cdf(
    u: OperatingPoint, y_grid, family: GroundTruthFamily = DEFAULT_FAMILY
) -> np.ndarray:
    """Exact CDF of the family at a condition, on a sorted grid."""
    grid = np.asarray(y_grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a non-empty 1-D array")
    if np.any(np.diff(grid) < 0):
        raise ValueError("grid must be sorted ascending")
    return cdf(family.params(u), grid)


def generate_dataset(spec: GridSpec, family: GroundTruthFamily = DEFAULT_FAMILY) -> Dataset:
    """Draw the full recording protocol from the family.

    Record (condition ci, record rj) uses the stream
    ``RandomStream(spec.seed, stream_id_for(ci, rj))`` and ancestral
    sampling, so any subset can be regenerated independently and the result
    does not depend on generation order.  Negative draws are retained: the
    family puts a small sliver of mass below zero and the recorded values
    must integrate to one against the exact CDF.
    """
    conditions = spec.conditions()
    records: dict[int, list[KnockRecord]] = {}
    for ci, u in enumerate(conditions):
        params = family.params(u)
        recs = []
        for rj in range(spec.records_per_condition):
            rng = RandomStream(spec.seed, stream_id_for(ci, rj))
            ki = sample_ancestral(params, rng, spec.cycles_per_record)
            recs.append(KnockRecord(condition=u, record_id=rj, ki=ki))
        records[ci] = recs
    return Dataset(conditions, records)
