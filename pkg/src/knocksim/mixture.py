"""Gaussian mixture densities: evaluation, sampling oracle, EM, bandwidth theory.

A knock-intensity density is represented as a weighted sum of m Gaussian
kernels.  Kernels are normalized as one-dimensional Gaussians,
1/(sqrt(2*pi)*sigma), so every mixture integrates to one.

``sample_ancestral`` is the exact-sampling oracle (component index, then a
Gaussian variate) used to cross-validate the accept-reject generator; the
production sampling path lives in :mod:`knocksim.sampler`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .rng import RandomStream

WEIGHT_SUM_TOL = 1e-9
DEFAULT_SIGMA_FLOOR = 1e-6


@dataclass(frozen=True)
class MixtureParams:
    """Weights, centers and standard deviations of an m-kernel mixture."""

    weights: np.ndarray
    means: np.ndarray
    sigmas: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        mu = np.array(self.means, dtype=np.float64)
        sg = np.array(self.sigmas, dtype=np.float64)
        if not (w.ndim == mu.ndim == sg.ndim == 1) or not (w.size == mu.size == sg.size):
            raise ValueError("weights, means, sigmas must be equal-length 1-D")
        if w.size < 1:
            raise ValueError("need at least one kernel")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(mu)) and np.all(np.isfinite(sg))):
            raise ValueError("mixture parameters must be finite")
        if np.any(w <= 0):
            raise ValueError("all weights must be positive")
        if abs(float(w.sum()) - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights must sum to 1, got {w.sum()!r}")
        if np.any(sg <= 0):
            raise ValueError("all sigmas must be positive")
        for a in (w, mu, sg):
            a.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "sigmas", sg)

    @property
    def m(self) -> int:
        return self.weights.size


@dataclass(frozen=True)
class AmiseInputs:
    """Kernel count and squared L2 norm of the target density's second
    derivative, the two drivers of the asymptotic bandwidth trade-off."""

    count: int
    curvature: float

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if not (self.curvature > 0 and math.isfinite(self.curvature)):
            raise ValueError("curvature must be positive and finite")


def _eval(params: MixtureParams, y, kernel):
    arr = np.asarray(y, dtype=np.float64)
    out = kernel(params.weights, params.means, params.sigmas, np.atleast_1d(arr).ravel())
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


def log_pdf(params: MixtureParams, y):
    """log of the mixture density, evaluated with log-sum-exp."""
    return _eval(params, y, _kernels.logpdf_batch)


def pdf(params: MixtureParams, y):
    return _eval(params, y, _kernels.pdf_batch)


def cdf(params: MixtureParams, y):
    """Weighted sum of Gaussian CDFs via the complementary error function."""
    return _eval(params, y, _kernels.cdf_batch)


def sample_ancestral(params: MixtureParams, rng: RandomStream, n: int | None = None):
    """Exact mixture draw(s): component index by weight, then a Gaussian.

    Consumes three stream positions per draw (one component uniform, two
    for the normal variate).
    """
    count = 1 if n is None else int(n)
    cumw = np.cumsum(params.weights)
    out = _kernels.ancestral_block(
        rng.base_key, rng.position, cumw, params.means, params.sigmas, count
    )
    rng.advance(3 * count)
    return float(out[0]) if n is None else out


def density_sup_bound(params: MixtureParams) -> float:
    """Closed-form bound sum_i w_i/(sqrt(2*pi)*sigma_i) >= sup_y pdf(y)."""
    return float(
        np.sum(params.weights / (math.sqrt(2.0 * math.pi) * params.sigmas))
    )


def em_fit(
    samples,
    m: int,
    *,
    max_iter: int = 500,
    tol: float = 1e-8,
    sigma_floor: float = DEFAULT_SIGMA_FLOOR,
    seed: int | None = None,
):
    """Fit an m-kernel mixture by expectation-maximization.

    Initialization is deterministic: samples are sorted and split into m
    contiguous quantile blocks, each component starting at its block's mean
    and (population) std with weight 1/m, so results do not depend on a
    seed (``seed`` is accepted for interface stability and unused).

    Iterates until ``max_iter`` or the relative log-likelihood change drops
    below ``tol``; sigmas are floored at ``sigma_floor`` throughout.

    Returns (MixtureParams, per-iteration total log-likelihood array).
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("samples must be 1-D")
    if m < 1:
        raise ValueError("need m >= 1")
    if x.size < m:
        raise ValueError(f"need at least {m} samples to fit {m} kernels")

    xs = np.sort(x)
    blocks = np.array_split(xs, m)
    w = np.full(m, 1.0 / m)
    mu = np.array([b.mean() for b in blocks])
    sg = np.array([max(b.std(), sigma_floor) for b in blocks])

    n = x.size
    history = []
    prev_ll = -np.inf
    for _ in range(max_iter):
        # E-step in log space
        logcomp = (
            np.log(w)[None, :]
            - np.log(sg)[None, :]
            - 0.5 * math.log(2.0 * math.pi)
            - 0.5 * ((x[:, None] - mu[None, :]) / sg[None, :]) ** 2
        )
        top = logcomp.max(axis=1, keepdims=True)
        norm = top[:, 0] + np.log(np.sum(np.exp(logcomp - top), axis=1))
        ll = float(norm.sum())
        history.append(ll)
        resp = np.exp(logcomp - norm[:, None])

        # M-step
        nk = resp.sum(axis=0)
        dead = nk <= 0.0
        safe_nk = np.where(dead, 1.0, nk)
        new_mu = (resp * x[:, None]).sum(axis=0) / safe_nk
        var = (resp * (x[:, None] - new_mu[None, :]) ** 2).sum(axis=0) / safe_nk
        mu = np.where(dead, mu, new_mu)
        sg = np.where(dead, sg, np.maximum(np.sqrt(var), sigma_floor))
        w = np.where(dead, 1e-12, nk / n)
        w = w / w.sum()

        if abs(ll - prev_ll) < tol * max(1.0, abs(prev_ll)):
            break
        prev_ll = ll

    return MixtureParams(w, mu, sg), np.asarray(history)


def amise(delta: float, inputs: AmiseInputs) -> float:
    """First-order asymptotic mean integrated squared error at bandwidth delta.

    (1/4) * delta^2 * curvature + 1/(2 * count * sqrt(pi * delta)) --
    squared-bias term plus integrated-variance term.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    return (
        0.25 * delta * delta * inputs.curvature
        + 1.0 / (2.0 * inputs.count * math.sqrt(math.pi * delta))
    )


def amise_optimal_delta(inputs: AmiseInputs) -> float:
    """Bandwidth minimizing the asymptotic error:
    (1 / (2 * count * sqrt(pi) * curvature)) ** (2/5)."""
    return (1.0 / (2.0 * inputs.count * math.sqrt(math.pi) * inputs.curvature)) ** 0.4
