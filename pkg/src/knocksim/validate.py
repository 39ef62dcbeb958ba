"""Distribution-fidelity protocols for trained simulators.

Steady protocol: leave one grid condition out, train on the rest, generate
many independent groups of cycles at the held-out condition, and score
each group against the held-out measurements with the CDF fitting error
and the two-sample KS statistic.  The fitting error is evaluated at the
sorted test-sample values: o_i is the test ECDF there (i/n by
construction) and o_hat_i the simulated ECDF.

Transient protocol: run trained models along a piecewise-constant
schedule and summarize each segment; with a reference series, score each
segment by two-sample KS.

Every task owns a stream derived from (seed, tag, indices), so fanning the
work out over threads cannot change any byte of the result: results are
reduced in task order, and the streams never depend on scheduling.  Tags:
1 = training, 2 = steady group generation, 3 = transient series.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import mixture
from .core import Dataset, split_leave_one_out
from .mdn import MdnModel, TrainingConfig, forward, train
from .rng import RandomStream, stream_id_for
from .sampler import Schedule, SimulatedSeries, accept_reject, build_envelope, simulate_transient
from .stats import Ecdf, GroupErrorSummary, fitting_error, group_error_summary, ks_statistic, rel_freq_histogram

TAG_TRAIN = 1
TAG_GROUP = 2
TAG_SERIES = 3


@dataclass(frozen=True)
class ConditionErrors:
    """Raw per-group scores for one (held-out condition, kernel count)."""

    condition_id: int
    kernel_count: int
    fit_errors: np.ndarray
    ks_stats: np.ndarray

    def __post_init__(self):
        for name in ("fit_errors", "ks_stats"):
            a = np.array(getattr(self, name), dtype=np.float64)
            a.flags.writeable = False
            object.__setattr__(self, name, a)


@dataclass(frozen=True)
class ValidationReport:
    """Config echo plus raw group scores; summaries are derived views."""

    groups: int
    samples_per_group: int
    seed: int
    m_values: tuple[int, ...]
    holdout: tuple[int, ...]
    raw: tuple[ConditionErrors, ...]

    def _pool(self, m: int, field: str) -> np.ndarray:
        parts = [getattr(c, field) for c in self.raw if c.kernel_count == m]
        if not parts:
            raise KeyError(f"no results for kernel count {m}")
        return np.concatenate(parts)

    def fit_summary(self, m: int, level: float = 0.99) -> GroupErrorSummary:
        """CDF fitting error pooled over held-out conditions and groups."""
        return group_error_summary(self._pool(m, "fit_errors"), level)

    def ks_summary(self, m: int, level: float = 0.99) -> GroupErrorSummary:
        return group_error_summary(self._pool(m, "ks_stats"), level)

    def mean_fit_error(self, m: int) -> float:
        return float(self._pool(m, "fit_errors").mean())


def _steady_cell(
    data: Dataset,
    cid: int,
    m: int,
    groups: int,
    samples_per_group: int,
    train_config: TrainingConfig,
    seed: int,
) -> ConditionErrors:
    train_data, test_data = split_leave_one_out(data, cid)
    cfg = replace(train_config, kernel_count=m)
    model, _ = train(train_data, cfg, rng=RandomStream(seed, stream_id_for(TAG_TRAIN, cid, m)))
    params = forward(model, data.conditions[cid])
    env = build_envelope(params)

    xs = np.sort(test_data.samples_of(0))
    test_ecdf = Ecdf(xs)
    o = test_ecdf(xs)

    fit_errors = np.empty(groups)
    ks_stats = np.empty(groups)
    for g in range(groups):
        rng = RandomStream(seed, stream_id_for(TAG_GROUP, cid, m, g))
        sim, _ = accept_reject(params, samples_per_group, rng, envelope=env)
        fit_errors[g] = fitting_error(o, Ecdf(sim)(xs))
        ks_stats[g] = ks_statistic(sim, test_ecdf)
    return ConditionErrors(cid, m, fit_errors, ks_stats)


def steady_validate(
    data: Dataset,
    m_values,
    groups: int,
    samples_per_group: int,
    train_config: TrainingConfig,
    seed: int,
    *,
    holdout=None,
    threads: int = 1,
) -> ValidationReport:
    """Leave-one-out validation across conditions and kernel counts.

    ``holdout`` selects the held-out condition identifiers (default: all).
    ``threads`` only distributes the (condition, kernel-count) cells; every
    cell derives its own streams, and cells are reduced in task order, so
    the report is identical for any thread count.
    """
    m_values = tuple(int(m) for m in m_values)
    if not m_values:
        raise ValueError("m_values must be non-empty")
    if any(m < 1 for m in m_values):
        raise ValueError("kernel counts must be >= 1")
    if data.n_conditions < 2:
        raise ValueError("need at least two conditions to hold one out")
    if groups < 2:
        raise ValueError("need at least two groups")
    if samples_per_group < 1:
        raise ValueError("samples_per_group must be >= 1")
    if holdout is None:
        holdout = range(data.n_conditions)
    holdout = tuple(int(c) for c in holdout)
    for cid in holdout:
        if not 0 <= cid < data.n_conditions:
            raise ValueError(f"unknown condition identifier {cid}")
    if threads < 1:
        raise ValueError("threads must be >= 1")

    tasks = [(cid, m) for cid in holdout for m in m_values]

    def run(task):
        cid, m = task
        return _steady_cell(data, cid, m, groups, samples_per_group, train_config, seed)

    if threads == 1:
        raw = tuple(run(t) for t in tasks)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            raw = tuple(pool.map(run, tasks))
    return ValidationReport(
        groups=groups,
        samples_per_group=samples_per_group,
        seed=seed,
        m_values=m_values,
        holdout=holdout,
        raw=raw,
    )


@dataclass(frozen=True)
class EmSweep:
    """Per-condition EM fitting errors across kernel counts.

    Cells that could not be fitted hold NaN, with the reason in
    ``messages`` (empty string when the whole row fitted)."""

    m_values: tuple[int, ...]
    condition_ids: tuple[int, ...]
    e_cdf: np.ndarray
    e_relfreq: np.ndarray
    messages: tuple[str, ...]

    def mean_e_cdf(self) -> np.ndarray:
        """Mean over fitted conditions, one value per kernel count."""
        return np.nanmean(self.e_cdf, axis=0)


def kernel_sweep_em(data: Dataset, m_values, n_bins: int = 50) -> EmSweep:
    """EM-fit every condition at each kernel count and score both ways.

    The CDF error compares the fitted mixture CDF with the condition ECDF
    at the sorted sample values; the relative-frequency error compares raw
    mixture bin mass with the sample histogram on ``n_bins`` equal bins
    spanning the condition's sample range (bins shared across kernel
    counts, mixture mass not renormalized to the range).  A condition with
    fewer samples than some kernel count gets NaN cells and a message
    instead of aborting the sweep.
    """
    m_values = tuple(int(m) for m in m_values)
    if not m_values:
        raise ValueError("m_values must be non-empty")
    ncond = data.n_conditions
    e_cdf = np.full((ncond, len(m_values)), np.nan)
    e_rf = np.full((ncond, len(m_values)), np.nan)
    messages = []
    for cid in range(ncond):
        x = data.samples_of(cid)
        xs = np.sort(x)
        o = np.arange(1, xs.size + 1) / xs.size
        hist = rel_freq_histogram(x, n_bins, (float(xs[0]), float(xs[-1])))
        msg = ""
        for j, m in enumerate(m_values):
            if xs.size < m:
                msg = f"condition {cid}: {xs.size} samples cannot fit {m} kernels"
                continue
            params, _ = mixture.em_fit(x, m)
            e_cdf[cid, j] = fitting_error(o, mixture.cdf(params, xs))
            edge_cdf = mixture.cdf(params, hist.bin_edges)
            e_rf[cid, j] = fitting_error(hist.rel_freq, np.diff(edge_cdf))
        messages.append(msg)
    return EmSweep(
        m_values=m_values,
        condition_ids=tuple(range(ncond)),
        e_cdf=e_cdf,
        e_relfreq=e_rf,
        messages=tuple(messages),
    )


@dataclass(frozen=True)
class TransientReport:
    """Per-model series along a schedule with per-segment statistics.

    ``segment_means`` / ``segment_vars`` are (model, segment) matrices
    (variance is the population form); ``reference_ks`` holds per-segment
    two-sample KS against the reference series when one was given."""

    schedule: Schedule
    m_values: tuple[int, ...]
    seed: int
    series: tuple[SimulatedSeries, ...]
    segment_means: np.ndarray
    segment_vars: np.ndarray
    reference_ks: np.ndarray | None


def transient_validate(
    models: dict[int, MdnModel],
    schedule: Schedule,
    reference=None,
    seed: int = 0,
) -> TransientReport:
    """Simulate each model along the schedule and summarize segments.

    Model with kernel count m draws from stream (seed, tag 3, m).  The
    optional reference is a KI array aligned with the schedule (same total
    cycle count)."""
    if not models:
        raise ValueError("need at least one model")
    m_values = tuple(sorted(models))
    bounds = np.concatenate([[0], np.cumsum(schedule.cycles)])
    ref = None
    if reference is not None:
        ref = np.asarray(reference, dtype=np.float64)
        if ref.shape != (schedule.total_cycles,):
            raise ValueError("reference length must match the schedule")

    series = []
    means = np.empty((len(m_values), schedule.n_segments))
    variances = np.empty_like(means)
    ref_ks = np.empty_like(means) if ref is not None else None
    for i, m in enumerate(m_values):
        rng = RandomStream(seed, stream_id_for(TAG_SERIES, m))
        run = simulate_transient(models[m], schedule, rng)
        series.append(run)
        for j in range(schedule.n_segments):
            seg = run.ki[bounds[j]:bounds[j + 1]]
            means[i, j] = seg.mean()
            variances[i, j] = seg.var()
            if ref_ks is not None:
                ref_ks[i, j] = ks_statistic(seg, Ecdf(ref[bounds[j]:bounds[j + 1]]))
    return TransientReport(
        schedule=schedule,
        m_values=m_values,
        seed=seed,
        series=tuple(series),
        segment_means=means,
        segment_vars=variances,
        reference_ks=ref_ks,
    )
