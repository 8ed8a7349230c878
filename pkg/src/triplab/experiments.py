"""Config-driven simulation grids and the fusion pipeline.

A simulation run sweeps (loss, budget, trial) cells over one signal and one
noise model, writing three artifacts to the output directory:

  cells.jsonl    append-only per-cell results; the resume journal
  records.csv    all cells, sorted, without timings: byte-identical across
                 reruns of the same (config, seed)
  aggregate.csv  per-(loss, budget) mean and sample standard deviation
  timings.csv    wall times, kept separate so records.csv stays canonical

Every cell derives its own seed from (run seed, loss, budget index, trial)
via sha256, so cells are order-independent and the grid can run in a worker
pool without changing any output.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .evaluation import (
    affine_align_mse,
    aligned_embedding,
    aligned_pearson,
    estimate_success_probability,
)
from .losses import LossSpec
from .signals import Signal, generate_signal, load_signal, SIGNAL_KINDS
from .solver import SolverConfig, fit_embedding
from .triplets import (
    AnnotatorModel,
    ConstantLink,
    LabeledTripletSet,
    LogisticLink,
    fraction_to_count,
    fuse,
    partition_to_annotators,
    read_jsonl_by_annotator,
    sample_triplets,
    simulate_labels,
    triplet_budget,
    triplet_universe_size,
    write_jsonl,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

# 8 log-spaced budget fractions between the reported endpoints
DEFAULT_FRACTION_GRID = tuple(
    float(f) for f in np.geomspace(0.0005, 0.1077, num=8)
)


@dataclass(frozen=True)
class Budget:
    """One budget as a fraction of |T|, a raw count, or K in K*n*ln(n)."""

    fraction: float | None = None
    count: int | None = None
    k: float | None = None

    def __post_init__(self):
        given = [v is not None for v in (self.fraction, self.count, self.k)]
        if sum(given) != 1:
            raise ConfigError("budget needs exactly one of fraction, count, k")
        if self.fraction is not None and not (0 < self.fraction <= 1):
            raise ConfigError(f"budget fraction must be in (0, 1], got {self.fraction}")
        if self.count is not None and self.count < 1:
            raise ConfigError(f"budget count must be >= 1, got {self.count}")
        if self.k is not None and self.k <= 0:
            raise ConfigError(f"budget k must be > 0, got {self.k}")

    def resolve(self, n: int) -> int:
        if self.fraction is not None:
            return fraction_to_count(n, self.fraction)
        if self.count is not None:
            size = triplet_universe_size(n)
            if self.count > size:
                raise ConfigError(f"budget count {self.count} exceeds |T|={size}")
            return self.count
        return triplet_budget(n, self.k)

    def label(self) -> str:
        if self.fraction is not None:
            return f"frac:{self.fraction:g}"
        if self.count is not None:
            return f"count:{self.count}"
        return f"k:{self.k:g}"


@dataclass(frozen=True)
class ExperimentConfig:
    signal_kind: str | None = None
    signal_n: int = 178
    signal_seed: int = 0
    signal_path: str | None = None
    noise_model: str = "logistic"
    sigma: float = 20.0
    mu: float = 0.9
    eps_sd: float = 0.01
    budgets: tuple[Budget, ...] = tuple(
        Budget(fraction=f) for f in DEFAULT_FRACTION_GRID
    )
    losses: tuple[LossSpec, ...] = (LossSpec.ste(),)
    trials: int = 30
    seed: int = 0
    output_dir: str = "results"
    dimensions: int = 1
    restarts: int = 30
    max_iters: int = 1000
    rel_tol: float = 1e-7
    init_scale: float = 0.1

    def __post_init__(self):
        if (self.signal_kind is None) == (self.signal_path is None):
            raise ConfigError("signal needs exactly one of kind or path")
        if self.signal_kind is not None and self.signal_kind not in SIGNAL_KINDS:
            raise ConfigError(
                f"unknown signal kind {self.signal_kind!r}, expected one of {SIGNAL_KINDS}"
            )
        if self.noise_model not in ("logistic", "constant"):
            raise ConfigError(f"noise model must be logistic or constant, got {self.noise_model!r}")
        if self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials}")
        if not self.budgets:
            raise ConfigError("at least one budget is required")
        if not self.losses:
            raise ConfigError("at least one loss is required")
        if self.dimensions < 1:
            raise ConfigError(f"dimensions must be >= 1, got {self.dimensions}")

    def load_signal(self) -> Signal:
        if self.signal_path is not None:
            return load_signal(self.signal_path)
        return generate_signal(self.signal_kind, self.signal_n, self.signal_seed)

    def annotator_link(self):
        if self.noise_model == "logistic":
            return LogisticLink(sigma=self.sigma)
        return ConstantLink(mu=self.mu, eps_sd=self.eps_sd)

    def solver_config(self, seed: int) -> SolverConfig:
        return SolverConfig(
            restarts=self.restarts,
            max_iters=self.max_iters,
            rel_tol=self.rel_tol,
            init_scale=self.init_scale,
            seed=seed,
        )

    def config_hash(self) -> str:
        """Hash of every field that affects the numbers (not output_dir)."""
        payload = {
            "signal": [self.signal_kind, self.signal_n, self.signal_seed, self.signal_path],
            "noise": [self.noise_model, self.sigma, self.mu, self.eps_sd],
            "budgets": [b.label() for b in self.budgets],
            "losses": [spec.label() for spec in self.losses],
            "trials": self.trials,
            "seed": self.seed,
            "solver": [
                self.dimensions,
                self.restarts,
                self.max_iters,
                self.rel_tol,
                self.init_scale,
            ],
        }
        digest = hashlib.sha256(json.dumps(payload, sort_keys=True).encode())
        return digest.hexdigest()[:12]


def _parse_budgets(table: dict) -> tuple[Budget, ...]:
    keys = [key for key in ("fractions", "counts", "k") if key in table]
    if len(keys) > 1:
        raise ConfigError(f"budgets section takes one of fractions/counts/k, got {keys}")
    if not keys:
        return tuple(Budget(fraction=f) for f in DEFAULT_FRACTION_GRID)
    if keys[0] == "fractions":
        return tuple(Budget(fraction=float(f)) for f in table["fractions"])
    if keys[0] == "counts":
        return tuple(Budget(count=int(c)) for c in table["counts"])
    return (Budget(k=float(table["k"])),)


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Parse a TOML experiment file; see README for the schema."""
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    known = {"run", "signal", "noise", "budgets", "solver"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")

    run = doc.get("run", {})
    signal = doc.get("signal", {})
    noise = doc.get("noise", {})
    solver = doc.get("solver", {})

    kwargs: dict = {}
    if "kind" in signal:
        kwargs["signal_kind"] = str(signal["kind"])
        kwargs["signal_n"] = int(signal.get("n", 178))
        kwargs["signal_seed"] = int(signal.get("seed", 0))
    if "path" in signal:
        kwargs["signal_path"] = str(signal["path"])
    if not signal:
        raise ConfigError("config needs a [signal] section with kind or path")

    if noise:
        kwargs["noise_model"] = str(noise.get("model", "logistic"))
        if "sigma" in noise:
            kwargs["sigma"] = float(noise["sigma"])
        if "mu" in noise:
            kwargs["mu"] = float(noise["mu"])
        if "eps_sd" in noise:
            kwargs["eps_sd"] = float(noise["eps_sd"])

    kwargs["budgets"] = _parse_budgets(doc.get("budgets", {}))

    if "losses" in solver:
        kwargs["losses"] = tuple(LossSpec.parse(str(s)) for s in solver["losses"])
    for name in ("restarts", "max_iters", "dimensions"):
        if name in solver:
            kwargs[name] = int(solver[name])
    for name in ("rel_tol", "init_scale"):
        if name in solver:
            kwargs[name] = float(solver[name])

    if "trials" in run:
        kwargs["trials"] = int(run["trials"])
    if "seed" in run:
        kwargs["seed"] = int(run["seed"])
    if "output_dir" in run:
        kwargs["output_dir"] = str(run["output_dir"])

    if overrides:
        kwargs.update(overrides)
    try:
        return ExperimentConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class CellKey:
    loss: str  # LossSpec label
    budget_index: int
    trial: int


@dataclass(frozen=True)
class ExperimentRecord:
    config_hash: str
    loss: str
    budget_index: int
    budget_label: str
    budget_count: int
    trial: int
    cell_seed: int
    status: str  # "ok" or "failed"
    mse: float = math.nan
    rho: float = math.nan
    tau_v: float = math.nan
    risk: float = math.nan
    error: str = ""

    def sort_key(self):
        return (self.loss, self.budget_index, self.trial)


RECORD_FIELDS = [
    "config_hash",
    "loss",
    "budget_index",
    "budget_label",
    "budget_count",
    "trial",
    "cell_seed",
    "status",
    "mse",
    "rho",
    "tau_v",
    "risk",
    "error",
]


def cell_seed(run_seed: int, loss_label: str, budget_index: int, trial: int) -> int:
    """Stable 63-bit per-cell seed; cells are independent and order-free."""
    text = f"{run_seed}|{loss_label}|{budget_index}|{trial}"
    digest = hashlib.sha256(text.encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def run_cell(config: ExperimentConfig, key: CellKey) -> ExperimentRecord:
    """Sample, label, fit, and score one grid cell. Never raises."""
    spec = LossSpec.parse(key.loss)
    budget = config.budgets[key.budget_index]
    seed = cell_seed(config.seed, key.loss, key.budget_index, key.trial)
    base = dict(
        config_hash=config.config_hash(),
        loss=key.loss,
        budget_index=key.budget_index,
        budget_label=budget.label(),
        trial=key.trial,
        cell_seed=seed,
    )
    try:
        signal = config.load_signal()
        count = budget.resolve(signal.n)
        queries = sample_triplets(signal.n, count, seed=seed)
        model = AnnotatorModel("sim", config.annotator_link())
        labels = simulate_labels(
            model, signal, queries, np.random.default_rng([seed, 1])
        )
        result = fit_embedding(
            labels, config.dimensions, spec, config.solver_config(seed)
        )
        fit = affine_align_mse(result.values, signal)
        rho = math.nan if fit.degenerate else aligned_pearson(result.values, signal)
        return ExperimentRecord(
            **base,
            budget_count=count,
            status="ok",
            mse=fit.mse,
            rho=rho,
            tau_v=result.violations,
            risk=result.risk,
        )
    except Exception as exc:  # cell failures are data, not crashes
        return ExperimentRecord(
            **base,
            budget_count=0,
            status="failed",
            error=f"{type(exc).__name__}: {exc}",
        )


@dataclass
class SimulationResult:
    config: ExperimentConfig
    records: list[ExperimentRecord]
    computed: int  # cells run in this invocation (not resumed)
    failed: int
    records_path: str
    aggregate_path: str

    @property
    def total(self) -> int:
        return len(self.records)

    @property
    def failure_threshold_exceeded(self) -> bool:
        return self.failed > 0.1 * self.total


def _grid_keys(config: ExperimentConfig) -> list[CellKey]:
    return [
        CellKey(spec.label(), b_idx, trial)
        for spec in config.losses
        for b_idx in range(len(config.budgets))
        for trial in range(config.trials)
    ]


def _load_journal(path, config_hash: str) -> dict[CellKey, ExperimentRecord]:
    done: dict[CellKey, ExperimentRecord] = {}
    if not os.path.exists(path):
        return done
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                continue  # torn tail from a crashed run
            if obj.get("config_hash") != config_hash:
                continue
            record = ExperimentRecord(**{k: obj[k] for k in RECORD_FIELDS})
            done[CellKey(record.loss, record.budget_index, record.trial)] = record
    return done


def _append_journal(fh, record: ExperimentRecord) -> None:
    payload = {name: getattr(record, name) for name in RECORD_FIELDS}
    fh.write(json.dumps(payload, separators=(",", ":")) + "\n")
    fh.flush()


def _format_value(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_records_csv(records: list[ExperimentRecord], path) -> None:
    """Canonical sorted CSV; floats via repr so reruns are byte-identical."""
    rows = sorted(records, key=ExperimentRecord.sort_key)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RECORD_FIELDS)
        for record in rows:
            writer.writerow([_format_value(getattr(record, f)) for f in RECORD_FIELDS])


def read_records_csv(path) -> list[ExperimentRecord]:
    """Inverse of write_records_csv (for plot-data runs on saved results)."""
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(RECORD_FIELDS) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing record columns {sorted(missing)}")
        for row in reader:
            records.append(
                ExperimentRecord(
                    config_hash=row["config_hash"],
                    loss=row["loss"],
                    budget_index=int(row["budget_index"]),
                    budget_label=row["budget_label"],
                    budget_count=int(row["budget_count"]),
                    trial=int(row["trial"]),
                    cell_seed=int(row["cell_seed"]),
                    status=row["status"],
                    mse=float(row["mse"]),
                    rho=float(row["rho"]),
                    tau_v=float(row["tau_v"]),
                    risk=float(row["risk"]),
                    error=row["error"],
                )
            )
    if not records:
        raise ValueError(f"{path}: no records")
    return records


def aggregate_records(records: list[ExperimentRecord]) -> list[dict]:
    """Per-(loss, budget) mean and sample sd over successful trials."""
    groups: dict[tuple[str, int], list[ExperimentRecord]] = {}
    for record in records:
        groups.setdefault((record.loss, record.budget_index), []).append(record)
    rows = []
    for (loss, b_idx), cells in sorted(groups.items()):
        ok = [c for c in cells if c.status == "ok"]
        row = {
            "loss": loss,
            "budget_index": b_idx,
            "budget_label": cells[0].budget_label,
            "budget_count": max(c.budget_count for c in cells),
            "trials_ok": len(ok),
            "trials_failed": len(cells) - len(ok),
        }
        for metric in ("mse", "rho", "tau_v", "risk"):
            values = np.array([getattr(c, metric) for c in ok], dtype=np.float64)
            values = values[np.isfinite(values)]
            if values.size:
                row[f"{metric}_mean"] = float(values.mean())
                row[f"{metric}_sd"] = float(values.std(ddof=1)) if values.size > 1 else 0.0
            else:
                row[f"{metric}_mean"] = math.nan
                row[f"{metric}_sd"] = math.nan
        rows.append(row)
    return rows


def write_aggregate_csv(records: list[ExperimentRecord], path) -> None:
    rows = aggregate_records(records)
    if not rows:
        raise ValueError("no records to aggregate")
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _format_value(v) for k, v in row.items()})


def run_simulation(
    config: ExperimentConfig,
    jobs: int = 1,
    resume: bool = False,
    progress=None,
) -> SimulationResult:
    """Run the full (loss, budget, trial) grid and write the artifacts.

    With resume=True, cells already present in cells.jsonl (same config hash)
    are kept as-is and only the missing ones are computed.
    """
    config.load_signal()  # fail fast on a bad signal spec before the grid
    out = config.output_dir
    os.makedirs(out, exist_ok=True)
    journal_path = os.path.join(out, "cells.jsonl")
    config_hash = config.config_hash()

    done = _load_journal(journal_path, config_hash) if resume else {}
    keys = _grid_keys(config)
    pending = [key for key in keys if key not in done]

    mode = "a" if resume else "w"
    records: dict[CellKey, ExperimentRecord] = dict(done)
    computed = 0
    timings: list[tuple[CellKey, float]] = []
    with open(journal_path, mode) as journal:
        if jobs > 1 and len(pending) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                futures = {
                    pool.submit(run_cell, config, key): key for key in pending
                }
                for future in as_completed(futures):
                    record = future.result()
                    key = futures[future]
                    records[key] = record
                    _append_journal(journal, record)
                    computed += 1
                    if progress:
                        progress(record)
        else:
            for key in pending:
                start = time.perf_counter()
                record = run_cell(config, key)
                timings.append((key, time.perf_counter() - start))
                records[key] = record
                _append_journal(journal, record)
                computed += 1
                if progress:
                    progress(record)

    ordered = [records[key] for key in keys]
    records_path = os.path.join(out, "records.csv")
    aggregate_path = os.path.join(out, "aggregate.csv")
    write_records_csv(ordered, records_path)
    write_aggregate_csv(ordered, aggregate_path)
    if timings:
        with open(os.path.join(out, "timings.csv"), "a", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            for key, seconds in timings:
                writer.writerow([key.loss, key.budget_index, key.trial, f"{seconds:.4f}"])

    failed = sum(1 for r in ordered if r.status == "failed")
    return SimulationResult(
        config=config,
        records=ordered,
        computed=computed,
        failed=failed,
        records_path=records_path,
        aggregate_path=aggregate_path,
    )


# --- fusion pipeline ---------------------------------------------------------


@dataclass(frozen=True)
class FusionReport:
    n: int
    total_labels: int
    annotator_counts: dict[str, int]
    loss: str
    risk: float
    tau_v: float
    embedding_path: str
    mse: float | None = None
    rho: float | None = None


def run_fusion_pipeline(
    labels_path,
    output_dir,
    signal_path=None,
    spec: LossSpec | None = None,
    n: int | None = None,
    solver: SolverConfig | None = None,
    dimensions: int = 1,
) -> FusionReport:
    """Fuse per-annotator label sets, fit an embedding, write the artifacts.

    Writes embedding.csv (t, y per dimension), result.json, and, when ground
    truth is given, alignment metrics plus per-annotator success curves.
    """
    spec = spec or LossSpec.ste()
    solver = solver or SolverConfig()
    signal = load_signal(signal_path) if signal_path is not None else None
    if signal is not None and n is None:
        n = signal.n

    per_annotator = read_jsonl_by_annotator(labels_path, n=n)
    if not per_annotator:
        raise ValueError(f"{labels_path}: no labels found")
    fused = fuse(list(per_annotator.values()))

    result = fit_embedding(fused, dimensions, spec, solver)

    os.makedirs(output_dir, exist_ok=True)
    embedding_path = os.path.join(output_dir, "embedding.csv")
    with open(embedding_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t"] + [f"y_{d + 1}" for d in range(result.m)])
        for t in range(fused.n):
            writer.writerow([t + 1] + [repr(float(result.Y[d, t])) for d in range(result.m)])

    report_kwargs: dict = {}
    counts = {a: len(s) for a, s in sorted(per_annotator.items())}
    payload = {
        "n": fused.n,
        "total_labels": len(fused),
        "annotator_counts": counts,
        "loss": spec.label(),
        "risk": result.risk,
        "restart_risks": result.restart_risks,
        "tau_v": result.violations,
        "dimensions": result.m,
        "solver": {
            "restarts": solver.restarts,
            "max_iters": solver.max_iters,
            "rel_tol": solver.rel_tol,
            "init_scale": solver.init_scale,
            "seed": solver.seed,
        },
    }

    if signal is not None:
        fit = affine_align_mse(result.values, signal)
        rho = math.nan if fit.degenerate else aligned_pearson(result.values, signal)
        payload["alignment"] = {"a": fit.a, "b": fit.b, "mse": fit.mse, "rho": rho}
        report_kwargs.update(mse=fit.mse, rho=rho)
        overlay = {spec.label(): np.asarray(result.values)}
        write_overlay_csv(signal, overlay, os.path.join(output_dir, "overlay.csv"))
        curve_path = os.path.join(output_dir, "success_curves.csv")
        with open(curve_path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["annotator", "bin", "mean_distance_gap", "estimated_p", "count"])
            for annotator, subset in sorted(per_annotator.items()):
                bins = min(10, len(subset))
                curve = estimate_success_probability(subset, signal, num_bins=bins)
                for b_idx, sbin in enumerate(curve.bins):
                    writer.writerow(
                        [
                            annotator,
                            b_idx,
                            repr(sbin.mean_distance_gap),
                            repr(sbin.estimated_p),
                            sbin.count,
                        ]
                    )

    with open(os.path.join(output_dir, "result.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")

    return FusionReport(
        n=fused.n,
        total_labels=len(fused),
        annotator_counts=counts,
        loss=spec.label(),
        risk=result.risk,
        tau_v=result.violations,
        embedding_path=embedding_path,
        **report_kwargs,
    )


# --- plot-ready output -------------------------------------------------------


def write_overlay_csv(signal: Signal, embeddings: dict[str, np.ndarray], path) -> None:
    """Truth-vs-recovery overlay: columns t, z, then one aligned series each."""
    labels = sorted(embeddings)
    aligned = {label: aligned_embedding(embeddings[label], signal) for label in labels}
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "z"] + [f"y_aligned_{label}" for label in labels])
        for t in range(signal.n):
            row = [t + 1, repr(float(signal.values[t]))]
            row += [repr(float(aligned[label][t])) for label in labels]
            writer.writerow(row)


def emit_plot_data(records: list[ExperimentRecord], output_dir) -> list[str]:
    """Write plot-ready CSVs from simulation records; returns the paths."""
    if not records:
        raise ValueError("emit_plot_data needs at least one record")
    os.makedirs(output_dir, exist_ok=True)
    paths = []

    agg_path = os.path.join(output_dir, "mse_vs_budget.csv")
    rows = aggregate_records(records)
    with open(agg_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["loss", "budget_label", "budget_count", "mse_mean", "mse_sd", "rho_mean", "rho_sd"]
        )
        for row in rows:
            writer.writerow(
                [
                    row["loss"],
                    row["budget_label"],
                    row["budget_count"],
                    _format_value(row["mse_mean"]),
                    _format_value(row["mse_sd"]),
                    _format_value(row["rho_mean"]),
                    _format_value(row["rho_sd"]),
                ]
            )
    paths.append(agg_path)

    table_path = os.path.join(output_dir, "metrics_table.csv")
    with open(table_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["loss", "budget_label", "trial", "mse", "rho", "tau_v"])
        for record in sorted(records, key=ExperimentRecord.sort_key):
            if record.status != "ok":
                continue
            writer.writerow(
                [
                    record.loss,
                    record.budget_label,
                    record.trial,
                    _format_value(record.mse),
                    _format_value(record.rho),
                    _format_value(record.tau_v),
                ]
            )
    paths.append(table_path)

    violations_path = os.path.join(output_dir, "violations_table.csv")
    with open(violations_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["loss", "budget_label", "tau_v_mean", "tau_v_sd", "trials_ok"])
        for row in rows:
            writer.writerow(
                [
                    row["loss"],
                    row["budget_label"],
                    _format_value(row["tau_v_mean"]),
                    _format_value(row["tau_v_sd"]),
                    row["trials_ok"],
                ]
            )
    paths.append(violations_path)
    return paths


def simulate_human_study(
    signal: Signal,
    num_annotators: int,
    budget: int,
    link,
    seed: int,
    output_path,
) -> LabeledTripletSet:
    """Produce a disjoint multi-annotator JSONL file like a crowdsourcing run.

    Queries are pre-sampled once and dealt round-robin, so the per-annotator
    sets are disjoint by construction; this is the simulated stand-in for the
    annotation service's export.
    """
    queries = sample_triplets(signal.n, budget, seed=seed)
    ids = [f"annotator-{idx:03d}" for idx in range(num_annotators)]
    parts = partition_to_annotators(queries, ids)
    rng = np.random.default_rng([seed, 2])
    sets = [
        simulate_labels(AnnotatorModel(a, link), signal, qs, rng)
        for a, qs in parts.items()
        if qs
    ]
    fused = fuse(sets)
    write_jsonl(fused, output_path)
    return fused
