"""Cycle-sequence generation by accept-reject from mixture densities.

Proposals are uniform on a support window wide enough to carry all but a
negligible sliver of mixture mass; the envelope height is the closed-form
density bound sum(w_i / (sqrt(2 pi) sigma_i)), so no numeric search is
involved and the envelope area M = (upper - lower) * bound gives the
expected number of proposals per accepted draw.

Every proposal consumes exactly two stream positions (value, acceptance),
addressed by trial index.  Draw k of a run therefore lands at a fixed
stream offset no matter how the work is chunked internally, which makes a
piecewise-constant simulation on a constant schedule bitwise equal to the
steady-state call, segment splits included.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels, mixture
from .core import OperatingPoint
from .mdn import MdnModel, forward
from .rng import RandomStream

REJECTION_CAP = 1_000_000
DEFAULT_TAIL_K = 8.0


@dataclass(frozen=True)
class Envelope:
    """Uniform proposal box over a mixture's effective support."""

    lower: float
    upper: float
    density_bound: float

    def __post_init__(self):
        if not (np.isfinite(self.lower) and np.isfinite(self.upper)):
            raise ValueError("envelope edges must be finite")
        if not self.upper > self.lower:
            raise ValueError("envelope must have positive width")
        if not (np.isfinite(self.density_bound) and self.density_bound > 0):
            raise ValueError("density bound must be positive and finite")

    @property
    def area(self) -> float:
        """Envelope mass M; expected proposals per accepted draw."""
        return (self.upper - self.lower) * self.density_bound

    @property
    def expected_acceptance(self) -> float:
        return 1.0 / self.area


@dataclass(frozen=True)
class Schedule:
    """Piecewise-constant operating profile: per-segment cycle counts and
    condition coordinates, all the same length."""

    cycles: np.ndarray
    speed_rpm: np.ndarray
    manifold_bar: np.ndarray
    fit_deg: np.ndarray

    def __post_init__(self):
        cyc = np.array(self.cycles, dtype=np.int64)
        cols = {
            "speed_rpm": np.array(self.speed_rpm, dtype=np.float64),
            "manifold_bar": np.array(self.manifold_bar, dtype=np.float64),
            "fit_deg": np.array(self.fit_deg, dtype=np.float64),
        }
        if cyc.ndim != 1 or cyc.size == 0:
            raise ValueError("schedule needs at least one segment")
        if np.any(cyc < 1):
            raise ValueError("segment cycle counts must be >= 1")
        for name, col in cols.items():
            if col.shape != cyc.shape:
                raise ValueError(f"{name} length must match cycles")
        cyc.flags.writeable = False
        object.__setattr__(self, "cycles", cyc)
        for name, col in cols.items():
            col.flags.writeable = False
            object.__setattr__(self, name, col)
        # fail fast on bad coordinates
        for i in range(cyc.size):
            self.point(i)

    @property
    def n_segments(self) -> int:
        return self.cycles.size

    @property
    def total_cycles(self) -> int:
        return int(self.cycles.sum())

    def point(self, i: int) -> OperatingPoint:
        return OperatingPoint(
            float(self.speed_rpm[i]), float(self.manifold_bar[i]), float(self.fit_deg[i])
        )


@dataclass(frozen=True)
class SimulatedSeries:
    """Generated cycle sequence with its per-cycle operating conditions."""

    speed_rpm: np.ndarray
    manifold_bar: np.ndarray
    fit_deg: np.ndarray
    ki: np.ndarray
    n_trials: int

    def __post_init__(self):
        cols = {}
        for name in ("speed_rpm", "manifold_bar", "fit_deg", "ki"):
            col = np.array(getattr(self, name), dtype=np.float64)
            if col.ndim != 1:
                raise ValueError(f"{name} must be 1-D")
            col.flags.writeable = False
            cols[name] = col
        sizes = {c.size for c in cols.values()}
        if len(sizes) != 1:
            raise ValueError("series columns must share one length")
        for name, col in cols.items():
            object.__setattr__(self, name, col)

    def __len__(self) -> int:
        return self.ki.size


def build_envelope(params: mixture.MixtureParams, tail_k: float = DEFAULT_TAIL_K) -> Envelope:
    """Proposal box spanning every kernel center +- tail_k scales."""
    if not tail_k > 0:
        raise ValueError("tail_k must be positive")
    lower = float(np.min(params.means - tail_k * params.sigmas))
    upper = float(np.max(params.means + tail_k * params.sigmas))
    return Envelope(lower, upper, mixture.density_sup_bound(params))


def accept_reject(
    params: mixture.MixtureParams,
    count: int,
    rng: RandomStream,
    envelope: Envelope | None = None,
) -> tuple[np.ndarray, int]:
    """Draw ``count`` values from the mixture; returns (values, trials used).

    Proposal k uses stream positions (2k, 2k + 1); the stream advances by
    twice the number of trials actually consumed.  A run of REJECTION_CAP
    proposals without a single acceptance aborts: that only happens when
    the envelope does not cover the density, so it is treated as a usage
    error rather than bad luck (at any valid envelope the odds of even a
    thousand-long rejection run are astronomically small).
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    if envelope is None:
        envelope = build_envelope(params)
    if count == 0:
        return np.empty(0), 0
    out, ntrials = _kernels.accept_reject_block(
        rng.base_key,
        rng.position,
        params.weights,
        params.means,
        params.sigmas,
        envelope.lower,
        envelope.upper,
        envelope.density_bound,
        count,
        REJECTION_CAP,
    )
    if ntrials < 0:
        raise RuntimeError(
            f"envelope inconsistent: no acceptance in {REJECTION_CAP} "
            "consecutive proposals"
        )
    rng.advance(2 * ntrials)
    return out, int(ntrials)


def simulate_steady(
    model: MdnModel, point: OperatingPoint, count: int, rng: RandomStream
) -> SimulatedSeries:
    """Generate ``count`` cycles at one fixed operating point."""
    params = forward(model, point)
    ki, trials = accept_reject(params, count, rng)
    return SimulatedSeries(
        speed_rpm=np.full(count, point.speed),
        manifold_bar=np.full(count, point.manifold_pressure),
        fit_deg=np.full(count, point.fit),
        ki=ki,
        n_trials=trials,
    )


def simulate_transient(model: MdnModel, schedule: Schedule, rng: RandomStream) -> SimulatedSeries:
    """Generate one continuous sequence across a piecewise-constant schedule.

    The network forward pass and envelope are computed once per distinct
    condition (repeated segments hit a cache); the draw stream runs straight
    through the segments in order.
    """
    cache: dict[tuple[float, float, float], tuple[mixture.MixtureParams, Envelope]] = {}
    ki_parts = []
    cond_rows = []
    total_trials = 0
    for i in range(schedule.n_segments):
        point = schedule.point(i)
        key = (point.speed, point.manifold_pressure, point.fit)
        if key not in cache:
            params = forward(model, point)
            cache[key] = (params, build_envelope(params))
        params, env = cache[key]
        n = int(schedule.cycles[i])
        ki, trials = accept_reject(params, n, rng, envelope=env)
        total_trials += trials
        ki_parts.append(ki)
        cond_rows.append((n, key))
    ki = np.concatenate(ki_parts)
    cols = {name: np.empty(ki.size) for name in ("speed_rpm", "manifold_bar", "fit_deg")}
    at = 0
    for n, (spd, man, fit) in cond_rows:
        cols["speed_rpm"][at:at + n] = spd
        cols["manifold_bar"][at:at + n] = man
        cols["fit_deg"][at:at + n] = fit
        at += n
    return SimulatedSeries(ki=ki, n_trials=total_trials, **cols)
