"""Command-line surface: generate, train, simulate, analyze, validate.

Every subcommand is a pure function of its input files, flags, and --seed;
running one twice writes byte-identical outputs.  Malformed input files
exit with status 2 and a file:line diagnostic on stderr.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import io, mixture, stats
from .core import OperatingPoint
from .mdn import TrainingConfig, train
from .rng import RandomStream, stream_id_for
from .sampler import simulate_steady, simulate_transient
from .synth import GridSpec, generate_dataset
from .validate import TAG_TRAIN, kernel_sweep_em, steady_validate, transient_validate


def _r(x) -> str:
    """Shortest round-trip decimal of a 64-bit float."""
    return repr(float(x))


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(t) for t in text.split(",") if t != "")


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(t) for t in text.split(",") if t != "")


def _cmd_synth(args) -> int:
    spec = GridSpec(
        speeds=_floats(args.speeds),
        pressures=_floats(args.pressures),
        fits=_floats(args.fits),
        cycles_per_record=args.cycles,
        records_per_condition=args.records,
        seed=args.seed,
    )
    data = generate_dataset(spec)
    io.write_dataset(args.out, data)
    print(f"wrote {args.out}: {data.n_conditions} conditions, {data.n_samples} samples")
    return 0


def _train_config(args, kernel_count: int) -> TrainingConfig:
    return TrainingConfig(
        kernel_count=kernel_count,
        hidden_sizes=_ints(args.hidden),
        epochs=args.epochs,
        batch_size=args.batch,
        learning_rate=args.lr,
        seed=args.seed,
    )


def _cmd_train(args) -> int:
    data = io.read_dataset(args.data)
    kernels = _ints(args.kernels)
    if len(kernels) != 1:
        raise ValueError("train expects exactly one kernel count")
    model, history = train(data, _train_config(args, kernels[0]))
    io.write_model(args.out, model)
    if args.loss_out:
        with open(args.loss_out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("epoch,train_nll\n")
            for i, v in enumerate(history.train_nll):
                fh.write(f"{i},{_r(v)}\n")
    final = history.train_nll[-1] if len(history) else float("nan")
    print(f"wrote {args.out}: trained on {data.n_samples} samples, final NLL {final}")
    return 0


def _cmd_simulate(args) -> int:
    model = io.read_model(args.model)
    if args.schedule is not None:
        clash = [f for f in ("speed", "pressure", "fit") if getattr(args, f) is not None]
        if clash:
            raise ValueError(
                "simulate takes --schedule or --speed/--pressure/--fit, not both"
            )
        schedule = io.read_schedule(args.schedule)
        series = simulate_transient(model, schedule, RandomStream(args.seed))
    else:
        missing = [f for f in ("speed", "pressure", "fit") if getattr(args, f) is None]
        if missing:
            raise ValueError(
                "simulate needs --schedule or all of --speed/--pressure/--fit"
            )
        point = OperatingPoint(args.speed, args.pressure, args.fit)
        series = simulate_steady(model, point, args.n, RandomStream(args.seed))
    io.write_series(args.out, series)
    print(f"wrote {args.out}: {len(series)} cycles, {series.n_trials} proposals")
    return 0


def _cmd_analyze(args) -> int:
    if args.series is not None:
        series = io.read_series(args.series)
        pooled = series.ki
        run = series.ki
    else:
        data = io.read_dataset(args.data)
        pooled = data.samples_of(args.condition)
        run = data.records_of(args.condition)[args.record].ki
    band = stats.white_noise_band(run.size)
    with open(args.out_prefix + "_autocorr.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("lag,r,white_noise_band\n")
        for k in range(1, args.max_lag + 1):
            fh.write(f"{k},{_r(stats.autocorrelation(run, k))},{_r(band)}\n")
    xs = np.sort(pooled)
    with open(args.out_prefix + "_ecdf.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("ki,cum_prob\n")
        for i, y in enumerate(xs):
            fh.write(f"{_r(y)},{_r((i + 1) / xs.size)}\n")
    hist = stats.rel_freq_histogram(pooled, args.bins, (float(xs[0]), float(xs[-1])))
    with open(args.out_prefix + "_hist.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("bin_lo,bin_hi,rel_freq\n")
        for i in range(hist.rel_freq.size):
            fh.write(f"{_r(hist.bin_edges[i])},{_r(hist.bin_edges[i + 1])},{_r(hist.rel_freq[i])}\n")
    print(f"wrote {args.out_prefix}_autocorr.csv, _ecdf.csv, _hist.csv")
    return 0


def _cmd_validate(args) -> int:
    data = io.read_dataset(args.data)
    kernels = _ints(args.kernels)
    if args.protocol == "steady":
        holdout = None if args.holdout == "all" else _ints(args.holdout)
        report = steady_validate(
            data,
            kernels,
            args.groups,
            args.samples_per_group,
            _train_config(args, kernels[0]),
            args.seed,
            holdout=holdout,
            threads=args.threads,
        )
        io.write_report(args.out, report)
        for m in kernels:
            s = report.fit_summary(m)
            print(f"m={m}: mean fitting error {s.mean:.4f} [{s.lo:.4f}, {s.hi:.4f}]")
    elif args.protocol == "em-sweep":
        sweep = kernel_sweep_em(data, kernels, n_bins=args.bins)
        io.write_em_sweep(args.out, sweep)
        means = sweep.mean_e_cdf()
        for m, e in zip(kernels, means):
            print(f"m={m}: mean CDF error {e:.4f}")
    else:
        if args.schedule is None:
            raise ValueError("transient protocol needs --schedule")
        schedule = io.read_schedule(args.schedule)
        models = {}
        for m in kernels:
            models[m], _ = train(
                data,
                _train_config(args, m),
                rng=RandomStream(args.seed, stream_id_for(TAG_TRAIN, m)),
            )
        report = transient_validate(models, schedule, None, args.seed)
        io.write_transient_report(args.out, report)
        for i, m in enumerate(report.m_values):
            means = " ".join(f"{v:.3f}" for v in report.segment_means[i])
            print(f"m={m}: segment means {means}")
    print(f"wrote {args.out}")
    return 0


def _cmd_amise(args) -> int:
    inputs = mixture.AmiseInputs(count=args.count, curvature=args.curvature)
    d = mixture.amise_optimal_delta(inputs)
    lines = f"delta_star {_r(d)}\namise_min {_r(mixture.amise(d, inputs))}\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(lines)
    sys.stdout.write(lines)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    seeded = argparse.ArgumentParser(add_help=False)
    seeded.add_argument("--seed", type=int, default=0, help="base seed (default 0)")

    trainer = argparse.ArgumentParser(add_help=False)
    trainer.add_argument("--hidden", default="32,32", help="hidden layer widths, comma list")
    trainer.add_argument("--epochs", type=int, default=200)
    trainer.add_argument("--lr", type=float, default=1e-3)
    trainer.add_argument("--batch", type=int, default=256)

    top = argparse.ArgumentParser(prog="knocksim", description=__doc__)
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[seeded], help="generate a synthetic dataset file")
    p.add_argument("--out", required=True)
    p.add_argument("--speeds", default="800,1200,1600,2000", help="rpm, comma list")
    p.add_argument("--pressures", default="3,4,5,6,7,8", help="bar, comma list")
    p.add_argument("--fits", default="-4,-3,-2,-1,0,1,2", help="degrees, comma list")
    p.add_argument("--cycles", type=int, default=300, help="cycles per record")
    p.add_argument("--records", type=int, default=3, help="records per condition")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train", parents=[seeded, trainer], help="fit a model to a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kernels", default="3", help="kernel count (single value)")
    p.add_argument("--loss-out", default=None, help="per-epoch NLL CSV")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("simulate", parents=[seeded], help="generate a cycle series from a model")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--schedule", default=None, help="piecewise-constant schedule CSV")
    p.add_argument("--speed", type=float, default=None, help="rpm (steady)")
    p.add_argument("--pressure", type=float, default=None, help="bar (steady)")
    p.add_argument("--fit", type=float, default=None, help="degrees (steady)")
    p.add_argument("--n", type=int, default=300, help="cycles (steady)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("analyze", parents=[seeded], help="autocorrelation/ECDF/histogram CSVs")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", default=None, help="dataset CSV")
    src.add_argument("--series", default=None, help="series CSV")
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--condition", type=int, default=0, help="condition id (dataset input)")
    p.add_argument("--record", type=int, default=0, help="record for autocorrelation")
    p.add_argument("--max-lag", type=int, default=20)
    p.add_argument("--bins", type=int, default=50)
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("validate", parents=[seeded, trainer], help="distribution-fidelity protocols")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--protocol", choices=("steady", "transient", "em-sweep"), default="steady")
    p.add_argument("--kernels", default="1,2,3,5", help="kernel counts, comma list")
    p.add_argument("--groups", type=int, default=50)
    p.add_argument("--samples-per-group", type=int, default=900)
    p.add_argument("--holdout", default="all", help='"all" or comma list of condition ids')
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--schedule", default=None, help="schedule CSV (transient)")
    p.add_argument("--bins", type=int, default=50, help="histogram bins (em-sweep)")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("amise", parents=[seeded], help="optimal bandwidth and error minimum")
    p.add_argument("--count", type=int, required=True, help="sample count")
    p.add_argument("--curvature", type=float, required=True, help="integrated squared second derivative")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_amise)
    return top


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
