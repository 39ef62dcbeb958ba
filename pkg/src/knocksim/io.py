"""Canonical on-disk formats: datasets, series, schedules, models, reports.

Every format is UTF-8 text with LF newlines, fields in a fixed order, and
floats written as their shortest round-trip decimal (``repr``), so writing
the same object twice — or anything it round-trips through — is
byte-identical.  Readers are strict: they accept exactly the canonical
form and report the first offending line.
"""

from __future__ import annotations

import numpy as np

from .core import Dataset, KnockRecord, Normalizer, OperatingPoint
from .mdn import MdnModel
from .sampler import Schedule, SimulatedSeries
from .validate import ConditionErrors, EmSweep, TransientReport, ValidationReport

DATASET_HEADER = "condition_id,record_id,cycle,speed_rpm,manifold_bar,fit_deg,ki"
SERIES_HEADER = "cycle,speed_rpm,manifold_bar,fit_deg,ki"
SCHEDULE_HEADER = "cycles,speed_rpm,manifold_bar,fit_deg"
MODEL_MAGIC = "knocksim-model v1"
REPORT_MAGIC = "knocksim-report v1"
SWEEP_MAGIC = "knocksim-em-sweep v1"
TRANSIENT_MAGIC = "knocksim-transient v1"


class ParseError(ValueError):
    """Malformed input file; carries the path and 1-based line number."""

    def __init__(self, path, line_no: int, message: str):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


def _fmt(x: float) -> str:
    return repr(float(x))


def _open_w(path):
    return open(path, "w", encoding="utf-8", newline="\n")


def _read_lines(path) -> list[str]:
    with open(path, encoding="utf-8", newline="\n") as fh:
        return fh.read().split("\n")


class _Parser:
    """Line cursor with positioned errors."""

    def __init__(self, path):
        self.path = path
        self.lines = _read_lines(path)
        if self.lines and self.lines[-1] == "":
            self.lines.pop()
        self.at = 0

    def fail(self, message: str):
        raise ParseError(self.path, self.at + 1, message)

    @property
    def done(self) -> bool:
        return self.at >= len(self.lines)

    def peek(self) -> str:
        if self.done:
            self.fail("unexpected end of file")
        return self.lines[self.at]

    def next(self) -> str:
        line = self.peek()
        self.at += 1
        return line

    def expect(self, literal: str):
        if self.next() != literal:
            self.at -= 1
            self.fail(f"expected {literal!r}")

    def float_(self, token: str) -> float:
        try:
            v = float(token)
        except ValueError:
            self.fail(f"bad float {token!r}")
        if not np.isfinite(v):
            self.fail(f"non-finite value {token!r}")
        return v

    def int_(self, token: str) -> int:
        try:
            return int(token)
        except ValueError:
            self.fail(f"bad integer {token!r}")

    def keyed(self, key: str) -> list[str]:
        parts = self.next().split(" ")
        if parts[0] != key:
            self.at -= 1
            self.fail(f"expected field {key!r}")
        return parts[1:]


# -- dataset CSV --------------------------------------------------------------

def write_dataset(path, data: Dataset) -> None:
    with _open_w(path) as fh:
        fh.write(DATASET_HEADER + "\n")
        for cid in range(data.n_conditions):
            u = data.conditions[cid]
            head = f"{cid},%d,%d,{_fmt(u.speed)},{_fmt(u.manifold_pressure)},{_fmt(u.fit)},%s"
            for rec in data.records_of(cid):
                for cyc, ki in enumerate(rec.ki):
                    fh.write(head % (rec.record_id, cyc, _fmt(ki)) + "\n")


def read_dataset(path) -> Dataset:
    p = _Parser(path)
    p.expect(DATASET_HEADER)
    conditions: list[OperatingPoint] = []
    records: dict[int, list[KnockRecord]] = {}
    cur = None  # (cid, rid, point, [ki])

    def close(cur):
        cid, rid, point, ki = cur
        records.setdefault(cid, []).append(
            KnockRecord(condition=point, record_id=rid, ki=np.array(ki))
        )

    while not p.done:
        parts = p.peek().split(",")
        if len(parts) != 7:
            p.fail(f"expected 7 fields, got {len(parts)}")
        cid, rid, cyc = p.int_(parts[0]), p.int_(parts[1]), p.int_(parts[2])
        spd, man, fit, ki = (p.float_(t) for t in parts[3:])
        try:
            point = OperatingPoint(spd, man, fit)
        except ValueError as e:
            p.fail(str(e))
        if cur is not None and (cid, rid) == (cur[0], cur[1]):
            if point != cur[2]:
                p.fail("condition coordinates changed inside a record")
            if cyc != len(cur[3]):
                p.fail(f"expected cycle {len(cur[3])}, got {cyc}")
            cur[3].append(ki)
            p.at += 1
            continue
        if cur is not None:
            close(cur)
        if cid == len(conditions):
            conditions.append(point)
        elif cid != len(conditions) - 1:
            p.fail(f"condition id {cid} out of order")
        if point != conditions[cid]:
            p.fail(f"condition {cid} coordinates differ from earlier rows")
        want_rid = len(records.get(cid, []))
        if rid != want_rid:
            p.fail(f"expected record id {want_rid}, got {rid}")
        if cyc != 0:
            p.fail(f"record must start at cycle 0, got {cyc}")
        cur = (cid, rid, point, [ki])
        p.at += 1
    if cur is None:
        p.fail("dataset has no rows")
    close(cur)
    try:
        return Dataset(conditions, records)
    except ValueError as e:
        p.fail(str(e))


# -- series CSV ----------------------------------------------------------------

def write_series(path, series: SimulatedSeries) -> None:
    with _open_w(path) as fh:
        fh.write(SERIES_HEADER + "\n")
        for i in range(len(series)):
            fh.write(
                f"{i},{_fmt(series.speed_rpm[i])},{_fmt(series.manifold_bar[i])},"
                f"{_fmt(series.fit_deg[i])},{_fmt(series.ki[i])}\n"
            )


def read_series(path) -> SimulatedSeries:
    p = _Parser(path)
    p.expect(SERIES_HEADER)
    cols = ([], [], [], [])
    while not p.done:
        parts = p.peek().split(",")
        if len(parts) != 5:
            p.fail(f"expected 5 fields, got {len(parts)}")
        if p.int_(parts[0]) != len(cols[0]):
            p.fail(f"expected cycle {len(cols[0])}")
        for col, tok in zip(cols, parts[1:]):
            col.append(p.float_(tok))
        p.at += 1
    return SimulatedSeries(
        speed_rpm=np.array(cols[0]),
        manifold_bar=np.array(cols[1]),
        fit_deg=np.array(cols[2]),
        ki=np.array(cols[3]),
        n_trials=0,
    )


# -- schedule CSV ---------------------------------------------------------------

def write_schedule(path, schedule: Schedule) -> None:
    with _open_w(path) as fh:
        fh.write(SCHEDULE_HEADER + "\n")
        for i in range(schedule.n_segments):
            fh.write(
                f"{int(schedule.cycles[i])},{_fmt(schedule.speed_rpm[i])},"
                f"{_fmt(schedule.manifold_bar[i])},{_fmt(schedule.fit_deg[i])}\n"
            )


def read_schedule(path) -> Schedule:
    p = _Parser(path)
    p.expect(SCHEDULE_HEADER)
    cycles, cols = [], ([], [], [])
    while not p.done:
        parts = p.peek().split(",")
        if len(parts) != 4:
            p.fail(f"expected 4 fields, got {len(parts)}")
        cycles.append(p.int_(parts[0]))
        for col, tok in zip(cols, parts[1:]):
            col.append(p.float_(tok))
        p.at += 1
    if not cycles:
        p.fail("schedule has no segments")
    try:
        return Schedule(
            cycles=np.array(cycles),
            speed_rpm=np.array(cols[0]),
            manifold_bar=np.array(cols[1]),
            fit_deg=np.array(cols[2]),
        )
    except ValueError as e:
        p.fail(str(e))


# -- model file -------------------------------------------------------------------

def write_model(path, model: MdnModel) -> None:
    """Versioned text form; parameters flat in the canonical order."""
    sizes = [model.input_dim, *model.hidden_sizes, 3 * model.kernel_count]
    norm = model.normalizer
    with _open_w(path) as fh:
        fh.write(MODEL_MAGIC + "\n")
        fh.write("kernel_count " + str(model.kernel_count) + "\n")
        fh.write("sigma_floor " + _fmt(model.sigma_floor) + "\n")
        fh.write("layer_sizes " + " ".join(str(s) for s in sizes) + "\n")
        fh.write("input_mean " + " ".join(_fmt(v) for v in norm.input_mean) + "\n")
        fh.write("input_std " + " ".join(_fmt(v) for v in norm.input_std) + "\n")
        fh.write("output_mean " + _fmt(norm.output_mean) + "\n")
        fh.write("output_std " + _fmt(norm.output_std) + "\n")
        flat = model.flat_parameters()
        fh.write("params " + str(flat.size) + "\n")
        for v in flat:
            fh.write(_fmt(v) + "\n")


def read_model(path) -> MdnModel:
    p = _Parser(path)
    p.expect(MODEL_MAGIC)
    m = p.int_(p.keyed("kernel_count")[0])
    floor = p.float_(p.keyed("sigma_floor")[0])
    sizes = [p.int_(t) for t in p.keyed("layer_sizes")]
    if len(sizes) < 2:
        p.fail("need at least input and output layer sizes")
    mean = [p.float_(t) for t in p.keyed("input_mean")]
    std = [p.float_(t) for t in p.keyed("input_std")]
    out_mean = p.float_(p.keyed("output_mean")[0])
    out_std = p.float_(p.keyed("output_std")[0])
    count = p.int_(p.keyed("params")[0])
    flat = np.empty(count)
    for i in range(count):
        flat[i] = p.float_(p.next())
    if not p.done:
        p.fail("trailing content after parameters")

    weights, biases, at = [], [], 0
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        k = fan_out * fan_in
        if at + k + fan_out > count:
            raise ParseError(path, len(p.lines), "parameter count does not match layer sizes")
        weights.append(flat[at:at + k].reshape(fan_out, fan_in))
        at += k
        biases.append(flat[at:at + fan_out])
        at += fan_out
    if at != count:
        raise ParseError(path, len(p.lines), "parameter count does not match layer sizes")
    try:
        return MdnModel(
            weights=tuple(weights),
            biases=tuple(biases),
            kernel_count=m,
            sigma_floor=floor,
            normalizer=Normalizer(
                input_mean=np.array(mean),
                input_std=np.array(std),
                output_mean=out_mean,
                output_std=out_std,
            ),
        )
    except ValueError as e:
        raise ParseError(path, 1, str(e))


# -- report files ---------------------------------------------------------------

def _vals(a) -> str:
    return " ".join(_fmt(v) for v in np.asarray(a, dtype=np.float64))


def write_report(path, report: ValidationReport) -> None:
    """Config echo, per-m pooled summaries, then raw per-cell group scores."""
    with _open_w(path) as fh:
        fh.write(REPORT_MAGIC + "\n")
        fh.write("groups " + str(report.groups) + "\n")
        fh.write("samples_per_group " + str(report.samples_per_group) + "\n")
        fh.write("seed " + str(report.seed) + "\n")
        fh.write("m_values " + " ".join(str(m) for m in report.m_values) + "\n")
        fh.write("holdout " + " ".join(str(c) for c in report.holdout) + "\n")
        for m in report.m_values:
            fs, ks = report.fit_summary(m), report.ks_summary(m)
            fh.write(
                f"summary m {m} fit {_fmt(fs.mean)} {_fmt(fs.lo)} {_fmt(fs.hi)}"
                f" ks {_fmt(ks.mean)} {_fmt(ks.lo)} {_fmt(ks.hi)}\n"
            )
        for cell in report.raw:
            fh.write(f"cell condition {cell.condition_id} m {cell.kernel_count}\n")
            fh.write("fit_errors " + _vals(cell.fit_errors) + "\n")
            fh.write("ks_stats " + _vals(cell.ks_stats) + "\n")


def read_report(path) -> ValidationReport:
    p = _Parser(path)
    p.expect(REPORT_MAGIC)
    groups = p.int_(p.keyed("groups")[0])
    spg = p.int_(p.keyed("samples_per_group")[0])
    seed = p.int_(p.keyed("seed")[0])
    m_values = tuple(p.int_(t) for t in p.keyed("m_values"))
    holdout = tuple(p.int_(t) for t in p.keyed("holdout"))
    for _ in m_values:
        p.keyed("summary")  # derived view; recomputed from raw cells
    raw = []
    while not p.done:
        head = p.keyed("cell")
        if len(head) != 4 or head[0] != "condition" or head[2] != "m":
            p.at -= 1
            p.fail("malformed cell header")
        cid, m = p.int_(head[1]), p.int_(head[3])
        fit = np.array([p.float_(t) for t in p.keyed("fit_errors")])
        ks = np.array([p.float_(t) for t in p.keyed("ks_stats")])
        raw.append(ConditionErrors(cid, m, fit, ks))
    return ValidationReport(
        groups=groups,
        samples_per_group=spg,
        seed=seed,
        m_values=m_values,
        holdout=holdout,
        raw=tuple(raw),
    )


def write_em_sweep(path, sweep: EmSweep) -> None:
    with _open_w(path) as fh:
        fh.write(SWEEP_MAGIC + "\n")
        fh.write("m_values " + " ".join(str(m) for m in sweep.m_values) + "\n")
        fh.write("mean_e_cdf " + _vals(sweep.mean_e_cdf()) + "\n")
        for i, cid in enumerate(sweep.condition_ids):
            fh.write(f"condition {cid}\n")
            fh.write("e_cdf " + _vals(sweep.e_cdf[i]) + "\n")
            fh.write("e_relfreq " + _vals(sweep.e_relfreq[i]) + "\n")
            if sweep.messages[i]:
                fh.write("note " + sweep.messages[i] + "\n")


def write_transient_report(path, report: TransientReport) -> None:
    """Schedule echo, per-model segment statistics, then the raw series."""
    sch = report.schedule
    with _open_w(path) as fh:
        fh.write(TRANSIENT_MAGIC + "\n")
        fh.write("seed " + str(report.seed) + "\n")
        fh.write("segments " + str(sch.n_segments) + "\n")
        for i in range(sch.n_segments):
            fh.write(
                f"segment {int(sch.cycles[i])} {_fmt(sch.speed_rpm[i])}"
                f" {_fmt(sch.manifold_bar[i])} {_fmt(sch.fit_deg[i])}\n"
            )
        fh.write("m_values " + " ".join(str(m) for m in report.m_values) + "\n")
        for i, m in enumerate(report.m_values):
            fh.write(f"model m {m}\n")
            fh.write("segment_means " + _vals(report.segment_means[i]) + "\n")
            fh.write("segment_vars " + _vals(report.segment_vars[i]) + "\n")
            if report.reference_ks is not None:
                fh.write("reference_ks " + _vals(report.reference_ks[i]) + "\n")
            fh.write("ki " + _vals(report.series[i].ki) + "\n")
