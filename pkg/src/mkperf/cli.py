"""Command-line front end: train, predict, evaluate, cross-validate.

Exit codes: 0 success, 1 usage error, 2 data error, 3 solver error.
Per-iteration training progress is logged as JSON lines to stderr;
set ``MKPERF_LOG`` (debug/info/warning/quiet) to change verbosity.
"""

from __future__ import annotations

import logging
import os
import statistics
import sys
import time

import click

from . import dataio, model as model_mod
from .errors import DataError, SolverError
from .kernels import KernelBank, default_specs, parse_kernel_specs
from .measures import MeasureKind, evaluate
from .solver import TrainConfig, train

MEASURE_NAMES = [m.value for m in MeasureKind]

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_SOLVER = 3


def _configure_logging():
    level_name = os.environ.get("MKPERF_LOG", "info").strip().lower()
    levels = {
        "debug": logging.DEBUG,
        "info": logging.INFO,
        "warning": logging.WARNING,
        "quiet": logging.CRITICAL,
    }
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(name)s %(message)s"))
    root = logging.getLogger("mkperf")
    root.handlers[:] = [handler]
    root.setLevel(levels.get(level_name, logging.INFO))


def _load_dataset(path, fmt, label_column):
    if path == "-":
        source = sys.stdin.read()
    else:
        with open(path, "r", encoding="utf-8") as handle:
            source = handle.read()
    if fmt == "svm":
        return dataio.parse_sparse(source)
    return dataio.parse_dense_csv(source, label_column=label_column)


def _resolve_specs(kernels_text, feature_dim, single_kernel):
    if kernels_text == "default":
        specs = default_specs(feature_dim)
    else:
        try:
            specs = parse_kernel_specs(kernels_text)
        except ValueError as exc:
            raise click.UsageError(str(exc)) from None
    if single_kernel is not None:
        if not 0 <= single_kernel < len(specs):
            raise click.UsageError(
                "--single-kernel index %d out of range for %d kernels"
                % (single_kernel, len(specs))
            )
        specs = [specs[single_kernel]]
    return specs


data_options = [
    click.option("--data", "data_path", required=True,
                 help="Dataset path, or - for standard input."),
    click.option("--format", "fmt", type=click.Choice(["svm", "csv"]),
                 default="svm", show_default=True, help="Input format."),
    click.option("--label-column", type=int, default=0, show_default=True,
                 help="Label column for the csv format."),
]

train_options = [
    click.option("--measure", type=click.Choice(MEASURE_NAMES), default="err",
                 show_default=True, help="Performance measure to optimize."),
    click.option("--kernels", default="default", show_default=True,
                 help="Comma-separated kernel bank, e.g. "
                      "'linear,poly:degree=2,offset=1,rbf:gamma=0.1'."),
    click.option("--single-kernel", type=int, default=None,
                 help="Pin the bank to the kernel at this index (baseline mode)."),
    click.option("--c", "c_value", type=float, default=100.0, show_default=True,
                 help="Slack tradeoff."),
    click.option("--epsilon", type=float, default=1e-3, show_default=True,
                 help="Constraint-violation stopping tolerance."),
    click.option("--max-iters", type=int, default=500, show_default=True,
                 help="Cap on outer iterations."),
    click.option("--seed", type=int, default=0, show_default=True,
                 help="Seed for anything randomized (fold splits)."),
]


def _add_options(options):
    def wrap(command):
        for option in reversed(options):
            command = option(command)
        return command
    return wrap


@click.group()
def cli():
    """Train binary classifiers that directly optimize multivariate
    performance measures over a learned combination of kernels."""


@cli.command("train")
@_add_options(data_options)
@_add_options(train_options)
@click.option("--out", "out_path", required=True, help="Model output path.")
def cmd_train(data_path, fmt, label_column, measure, kernels, single_kernel,
              c_value, epsilon, max_iters, seed, out_path):
    """Train a model and write its document."""
    dataset = _load_dataset(data_path, fmt, label_column)
    dataio.require_trainable(dataset)
    specs = _resolve_specs(kernels, dataset.feature_dim, single_kernel)
    bank = KernelBank.build(specs, dataset.features)
    config = TrainConfig(
        measure=MeasureKind.from_name(measure),
        C=c_value,
        epsilon=epsilon,
        max_outer_iters=max_iters,
        seed=seed,
    )
    trained = train(dataset, bank, config)
    model_mod.save(trained, out_path)


@cli.command("predict")
@_add_options(data_options)
@click.option("--model", "model_path", required=True, help="Model document path.")
def cmd_predict(data_path, fmt, label_column, model_path):
    """Print one '<score> <decision>' line per sample."""
    trained = model_mod.load(model_path)
    dataset = _load_dataset(data_path, fmt, label_column)
    scores = trained.predict_scores(dataset.features)
    labels = trained.predict(dataset.features)
    for score, label in zip(scores, labels):
        click.echo("%.17g %+d" % (score, label))


@cli.command("evaluate")
@_add_options(data_options)
@click.option("--model", "model_path", required=True, help="Model document path.")
@click.option("--measures", "measures_text", default=",".join(MEASURE_NAMES),
              show_default=True, help="Comma-separated measures to report.")
def cmd_evaluate(data_path, fmt, label_column, model_path, measures_text):
    """Print the requested metrics of a model on a dataset."""
    trained = model_mod.load(model_path)
    dataset = _load_dataset(data_path, fmt, label_column)
    scores = trained.predict_scores(dataset.features)
    for name in measures_text.split(","):
        kind = MeasureKind.from_name(name.strip())
        try:
            value = evaluate(kind, dataset.labels, scores)
        except ValueError as exc:
            raise DataError(str(exc)) from None
        click.echo("%s %.12g" % (kind.value, value))


@cli.command("cv")
@_add_options(data_options)
@_add_options(train_options)
@click.option("--folds", type=int, default=10, show_default=True,
              help="Number of stratified folds.")
@click.option("--out", "out_path", default="-", show_default=True,
              help="Report CSV path, or - for standard output.")
def cmd_cv(data_path, fmt, label_column, measure, kernels, single_kernel,
           c_value, epsilon, max_iters, seed, folds, out_path):
    """Stratified cross-validation; emits a per-fold CSV report."""
    dataset = _load_dataset(data_path, fmt, label_column)
    dataio.require_trainable(dataset)
    kind = MeasureKind.from_name(measure)
    specs = _resolve_specs(kernels, dataset.feature_dim, single_kernel)
    plan = dataio.stratified_folds(dataset.labels, folds, seed)
    config = TrainConfig(
        measure=kind,
        C=c_value,
        epsilon=epsilon,
        max_outer_iters=max_iters,
        seed=seed,
    )
    rows = []
    for fold in range(folds):
        train_idx, held_idx = plan.split(fold)
        train_set = dataset.subset(train_idx)
        held_set = dataset.subset(held_idx)
        started = time.perf_counter()
        bank = KernelBank.build(specs, train_set.features)
        trained = train(train_set, bank, config)
        scores = trained.predict_scores(held_set.features)
        try:
            value = evaluate(kind, held_set.labels, scores)
        except ValueError as exc:
            raise DataError(str(exc)) from None
        seconds = time.perf_counter() - started
        rows.append((fold, kind.value, value, seconds, trained.iterations))
    lines = ["fold,measure,value,seconds,iterations"]
    for fold, name, value, seconds, iterations in rows:
        lines.append("%d,%s,%.12g,%.3f,%d" % (fold, name, value, seconds, iterations))
    report = "\n".join(lines) + "\n"
    if out_path == "-":
        click.echo(report, nl=False)
    else:
        with open(out_path, "w", encoding="ascii") as handle:
            handle.write(report)
    median = statistics.median(row[2] for row in rows)
    click.echo("median %.12g" % median, err=True)


def main(argv=None):
    """Entry point with the documented exit-code mapping."""
    _configure_logging()
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as exc:
        click.echo("error: %s" % exc.format_message(), err=True)
        return EXIT_USAGE
    except click.Abort:
        click.echo("error: aborted", err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        click.echo("error: %s" % exc.format_message(), err=True)
        return EXIT_USAGE
    except (DataError, OSError, ValueError) as exc:
        click.echo("error: %s" % exc, err=True)
        return EXIT_DATA
    except SolverError as exc:
        click.echo("error: %s" % exc, err=True)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
