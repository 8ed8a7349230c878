"""Command-line entry point.

Verbs:
  simulate   run a (loss, budget, trial) grid from a TOML config
  fuse       fuse a multi-annotator JSONL label file and fit an embedding
  evaluate   score a saved embedding against ground truth and/or labels
  plot-data  turn a records.csv into plot-ready CSV files
  serve      run the annotation HTTP service

Exit codes: 0 success, 2 config error, 3 data error, 4 more than 10% of
grid cells failed.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from .errors import (
    ConfigError,
    DuplicateQueryError,
    FusionConflictError,
    SignalFormatError,
)
from .evaluation import affine_align_mse, aligned_pearson, triplet_violations
from .experiments import (
    emit_plot_data,
    load_config,
    read_records_csv,
    run_fusion_pipeline,
    run_simulation,
)
from .losses import LossSpec
from .signals import load_signal
from .solver import SolverConfig
from .triplets import read_jsonl

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_PARTIAL = 4

_DATA_ERRORS = (
    FusionConflictError,
    DuplicateQueryError,
    SignalFormatError,
    FileNotFoundError,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="triplab",
        description="Recover time series from crowdsourced triplet comparisons.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    sim = sub.add_parser("simulate", help="run a simulation grid from a TOML config")
    sim.add_argument("--config", required=True, help="TOML experiment file")
    sim.add_argument("--seed", type=int, default=None, help="override the run seed")
    sim.add_argument("--out", default=None, help="override the output directory")
    sim.add_argument("--jobs", type=int, default=1, help="worker processes for grid cells")
    sim.add_argument("--resume", action="store_true", help="skip cells already journaled")
    sim.add_argument("--quiet", action="store_true", help="suppress per-cell progress lines")

    fus = sub.add_parser("fuse", help="fuse an annotator-labeled JSONL file and fit")
    fus.add_argument("--labels", required=True, help="JSON-Lines label file")
    fus.add_argument("--out", required=True, help="output directory")
    fus.add_argument("--signal", default=None, help="ground-truth CSV for scoring")
    fus.add_argument("--loss", default="ste", help="loss spec, e.g. ste, tste:2, ckl:10")
    fus.add_argument("--n", type=int, default=None, help="signal length if not inferable")
    fus.add_argument("--dimensions", type=int, default=1)
    fus.add_argument("--restarts", type=int, default=30)
    fus.add_argument("--max-iters", type=int, default=1000)
    fus.add_argument("--rel-tol", type=float, default=1e-7)
    fus.add_argument("--seed", type=int, default=0)

    ev = sub.add_parser("evaluate", help="score a saved embedding CSV")
    ev.add_argument("--embedding", required=True, help="CSV with t and y_1.. columns")
    ev.add_argument("--signal", default=None, help="ground-truth CSV")
    ev.add_argument("--labels", default=None, help="JSONL labels for the violation rate")
    ev.add_argument("--out", default=None, help="write the metrics JSON here instead of stdout")

    pd = sub.add_parser("plot-data", help="emit plot-ready CSVs from records.csv")
    pd.add_argument("--records", required=True)
    pd.add_argument("--out", required=True)

    srv = sub.add_parser("serve", help="run the annotation HTTP service")
    srv.add_argument("--data-dir", required=True, help="durable log directory")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8000)
    srv.add_argument("--lease-timeout", type=float, default=120.0)

    return parser


def _cmd_simulate(args) -> int:
    overrides: dict = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["output_dir"] = args.out
    config = load_config(args.config, overrides)

    def progress(record):
        if args.quiet:
            return
        tag = record.status
        if record.status == "ok":
            tag = f"mse={record.mse:.5f} rho={record.rho:.4f}"
        print(
            f"[{record.loss} {record.budget_label} trial={record.trial}] {tag}",
            file=sys.stderr,
        )

    result = run_simulation(config, jobs=args.jobs, resume=args.resume, progress=progress)
    print(
        f"{result.total} cells ({result.computed} computed, {result.failed} failed) "
        f"-> {result.records_path}"
    )
    if result.failure_threshold_exceeded:
        print(
            f"error: {result.failed}/{result.total} cells failed (>10%)",
            file=sys.stderr,
        )
        return EXIT_PARTIAL
    return EXIT_OK


def _cmd_fuse(args) -> int:
    solver = SolverConfig(
        restarts=args.restarts,
        max_iters=args.max_iters,
        rel_tol=args.rel_tol,
        seed=args.seed,
    )
    report = run_fusion_pipeline(
        args.labels,
        args.out,
        signal_path=args.signal,
        spec=LossSpec.parse(args.loss),
        n=args.n,
        solver=solver,
        dimensions=args.dimensions,
    )
    summary = {
        "n": report.n,
        "total_labels": report.total_labels,
        "annotators": len(report.annotator_counts),
        "loss": report.loss,
        "risk": report.risk,
        "tau_v": report.tau_v,
    }
    if report.mse is not None:
        summary["mse"] = report.mse
        summary["rho"] = report.rho
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def _read_embedding_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        names = [c for c in (reader.fieldnames or []) if c.startswith("y_")]
        if not names:
            raise ValueError(f"{path}: no y_* columns found")
        rows = [[float(row[name]) for name in names] for row in reader]
    if not rows:
        raise ValueError(f"{path}: no embedding rows")
    return np.asarray(rows, dtype=np.float64).T


def _cmd_evaluate(args) -> int:
    if args.signal is None and args.labels is None:
        raise ConfigError("evaluate needs --signal and/or --labels")
    Y = _read_embedding_csv(args.embedding)
    metrics: dict = {"n": int(Y.shape[1]), "dimensions": int(Y.shape[0])}
    if args.signal is not None:
        signal = load_signal(args.signal)
        fit = affine_align_mse(Y[0], signal)
        metrics["mse"] = fit.mse
        metrics["a"] = fit.a
        metrics["b"] = fit.b
        metrics["rho"] = None if fit.degenerate else aligned_pearson(Y[0], signal)
        metrics["mse_over_var"] = fit.mse / float(np.var(signal.values))
    if args.labels is not None:
        labels = read_jsonl(args.labels, n=int(Y.shape[1]))
        metrics["tau_v"] = triplet_violations(Y, labels)
        metrics["num_labels"] = len(labels)
    text = json.dumps(metrics, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return EXIT_OK


def _cmd_plot_data(args) -> int:
    records = read_records_csv(args.records)
    paths = emit_plot_data(records, args.out)
    for path in paths:
        print(path)
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.data_dir, lease_timeout=args.lease_timeout)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "fuse": _cmd_fuse,
    "evaluate": _cmd_evaluate,
    "plot-data": _cmd_plot_data,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.verb](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
