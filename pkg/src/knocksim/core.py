"""Domain types: operating points, knock records, datasets, normalization.

Knock intensity (KI) is a dimensionless per-cycle severity metric.  An
operating point is the condition triple (engine speed, manifold pressure,
fuel injection timing relative to borderline knock) that the KI
distribution is conditioned on.

All types are immutable after construction; arrays are stored float64 with
the writeable flag cleared so instances can be shared across tasks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

STD_FLOOR = 1e-8


def _frozen(a, dtype=np.float64) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class OperatingPoint:
    """Engine condition vector: speed [rpm], manifold pressure [bar],
    fuel injection timing [deg relative to borderline knock, BL = 0]."""

    speed: float
    manifold_pressure: float
    fit: float

    def __post_init__(self):
        if not (self.speed > 0 and math.isfinite(self.speed)):
            raise ValueError(f"speed must be positive, got {self.speed}")
        if not (self.manifold_pressure > 0 and math.isfinite(self.manifold_pressure)):
            raise ValueError(
                f"manifold pressure must be positive, got {self.manifold_pressure}"
            )
        if not math.isfinite(self.fit):
            raise ValueError(f"fit must be finite, got {self.fit}")

    def as_array(self) -> np.ndarray:
        return np.array([self.speed, self.manifold_pressure, self.fit])


@dataclass(frozen=True)
class KnockRecord:
    """One recorded run: consecutive-cycle KI values at a fixed condition."""

    condition: OperatingPoint
    record_id: int
    ki: np.ndarray

    def __post_init__(self):
        ki = _frozen(np.atleast_1d(self.ki))
        if ki.ndim != 1 or ki.size == 0:
            raise ValueError("ki must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(ki)):
            raise ValueError("ki values must be finite")
        object.__setattr__(self, "ki", ki)

    def __len__(self) -> int:
        return self.ki.size


class Dataset:
    """Knock records grouped by condition.

    Condition identifiers are dense integers starting at 0 (the index into
    ``conditions``); every record belongs to exactly one identifier.
    """

    def __init__(self, conditions, records_by_condition):
        conditions = tuple(conditions)
        grouped = []
        for cid in range(len(conditions)):
            if cid not in records_by_condition:
                raise ValueError(f"condition {cid} has no records")
            recs = tuple(records_by_condition[cid])
            if not recs:
                raise ValueError(f"condition {cid} has no records")
            for r in recs:
                if r.condition != conditions[cid]:
                    raise ValueError(
                        f"record {r.record_id} condition mismatch for id {cid}"
                    )
            grouped.append(recs)
        if len(records_by_condition) != len(conditions):
            raise ValueError("records reference unknown condition identifiers")
        self.conditions = conditions
        self._records = tuple(grouped)

    @property
    def n_conditions(self) -> int:
        return len(self.conditions)

    @property
    def n_samples(self) -> int:
        return sum(len(r) for recs in self._records for r in recs)

    def records_of(self, cid: int):
        self._check_cid(cid)
        return self._records[cid]

    def all_records(self):
        for recs in self._records:
            yield from recs

    def samples_of(self, cid: int) -> np.ndarray:
        """Pooled KI values of a condition, record order preserved."""
        self._check_cid(cid)
        return np.concatenate([r.ki for r in self._records[cid]])

    def _check_cid(self, cid: int) -> None:
        if not 0 <= cid < len(self._records):
            raise ValueError(f"unknown condition identifier {cid}")

    def pairs(self):
        """All (condition, KI) training pairs as a (N, 3) matrix and N-vector."""
        n = self.n_samples
        u = np.empty((n, 3))
        y = np.empty(n)
        at = 0
        for cid, recs in enumerate(self._records):
            cvec = self.conditions[cid].as_array()
            for r in recs:
                k = len(r)
                u[at:at + k] = cvec
                y[at:at + k] = r.ki
                at += k
        return u, y


@dataclass(frozen=True)
class Normalizer:
    """Affine standardization statistics for condition vectors and KI."""

    input_mean: np.ndarray
    input_std: np.ndarray
    output_mean: float
    output_std: float

    def __post_init__(self):
        object.__setattr__(self, "input_mean", _frozen(self.input_mean))
        object.__setattr__(self, "input_std", _frozen(self.input_std))
        if np.any(self.input_std < STD_FLOOR) or self.output_std < STD_FLOOR:
            raise ValueError("std components must be >= floor")

    def norm_inputs(self, u: np.ndarray) -> np.ndarray:
        return (u - self.input_mean) / self.input_std

    def denorm_inputs(self, z: np.ndarray) -> np.ndarray:
        return z * self.input_std + self.input_mean

    def norm_output(self, y):
        return (y - self.output_mean) / self.output_std

    def denorm_output(self, z):
        return z * self.output_std + self.output_mean


def fit_normalizer(train: Dataset) -> Normalizer:
    """Per-dimension sample statistics of all (u, y) pairs, stds floored.

    Standard deviations use the population form (ddof = 0) and are floored
    at 1e-8 so zero-variance dimensions stay invertible.
    """
    if train.n_samples == 0:
        raise ValueError("empty training set")
    u, y = train.pairs()
    return Normalizer(
        input_mean=u.mean(axis=0),
        input_std=np.maximum(u.std(axis=0), STD_FLOOR),
        output_mean=float(y.mean()),
        output_std=float(max(y.std(), STD_FLOOR)),
    )


def split_leave_one_out(data: Dataset, held_out: int):
    """Split into (train, test): test gets exactly the held-out condition.

    Remaining train conditions are renumbered densely, preserving order.
    """
    if not 0 <= held_out < data.n_conditions:
        raise ValueError(f"unknown condition identifier {held_out}")
    if data.n_conditions < 2:
        raise ValueError("cannot hold out the only condition")
    train_conditions = []
    train_records = {}
    for cid in range(data.n_conditions):
        if cid == held_out:
            continue
        train_records[len(train_conditions)] = data.records_of(cid)
        train_conditions.append(data.conditions[cid])
    train = Dataset(train_conditions, train_records)
    test = Dataset(
        (data.conditions[held_out],), {0: data.records_of(held_out)}
    )
    return train, test
