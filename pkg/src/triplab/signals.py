"""Ground-truth construct signals and their color-swatch rendering.

A :class:`Signal` is a length-n sequence of scalar intensities sampled at
1 Hz, so index t (1-based) is also the time in seconds. The dissimilarity
between two time points is the absolute difference of their values; this is
what both the simulated annotators and the evaluation code compare against.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidSizeError, SignalFormatError

SIGNAL_KINDS = ("task-a-like", "task-b-like", "sine", "custom-piecewise")


class SignalRangeWarning(UserWarning):
    """Loaded signal values fall outside the nominal [0, 1] range."""


@dataclass(frozen=True)
class Signal:
    """Hidden construct values over time.

    ``values`` is read-only after construction; operations on signals are
    pure, so instances are safe to share across threads.
    """

    values: np.ndarray
    name: str = "signal"
    sample_rate: int = 1

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size < 3:
            raise InvalidSizeError(
                f"signal needs at least 3 samples, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("signal values must be finite")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return int(self.values.size)

    def __len__(self) -> int:
        return self.n

    def dissimilarity(self, i: int, j: int) -> float:
        """Absolute value difference between 1-based time indices i and j."""
        n = self.n
        if not (1 <= i <= n and 1 <= j <= n):
            raise IndexError(f"indices ({i}, {j}) out of range 1..{n}")
        return float(abs(self.values[i - 1] - self.values[j - 1]))


def dissimilarity(signal: Signal, i: int, j: int) -> float:
    """Module-level alias for :meth:`Signal.dissimilarity`."""
    return signal.dissimilarity(i, j)


def generate_signal(kind: str, n: int, seed: int) -> Signal:
    """Synthesize a length-n construct in [0, 1], deterministic in (kind, n, seed).

    ``task-a-like`` alternates ramps with flat plateaus and brief excursions
    to the extremes; ``task-b-like`` is smooth and never flat; ``sine`` is the
    closed form 0.5 + 0.5*sin(2*pi*t/n); ``custom-piecewise`` interpolates
    random knots linearly.
    """
    if n < 3:
        raise InvalidSizeError(f"signal needs at least 3 samples, got n={n}")
    if kind not in SIGNAL_KINDS:
        raise ValueError(f"unknown signal kind {kind!r}, expected one of {SIGNAL_KINDS}")
    rng = np.random.default_rng([SIGNAL_KINDS.index(kind), seed])
    if kind == "sine":
        t = np.arange(n)
        values = 0.5 + 0.5 * np.sin(2 * np.pi * t / n)
    elif kind == "task-a-like":
        values = _task_a_like(n, rng)
    elif kind == "task-b-like":
        values = _task_b_like(n, rng)
    else:
        values = _piecewise(n, rng)
    return Signal(np.clip(values, 0.0, 1.0), name=f"{kind}-n{n}-s{seed}")


def _task_a_like(n: int, rng: np.random.Generator) -> np.ndarray:
    # Plateau / ramp / short-spike structure. Segments are laid out until n
    # samples are filled; at least two plateaus and two extreme excursions
    # are forced regardless of n by cycling through the segment kinds.
    out = np.empty(0)
    level = rng.uniform(0.35, 0.65)
    cycle = ["plateau", "ramp", "spike-high", "ramp", "plateau", "ramp", "spike-low", "ramp"]
    idx = 0
    plateau_len = max(3, n // 8)
    while out.size < n:
        seg = cycle[idx % len(cycle)]
        idx += 1
        if seg == "plateau":
            length = plateau_len + int(rng.integers(0, max(2, n // 12)))
            out = np.concatenate([out, np.full(length, level)])
        elif seg == "ramp":
            target = float(np.clip(level + rng.uniform(-0.45, 0.45), 0.1, 0.9))
            length = max(2, n // 10)
            out = np.concatenate([out, np.linspace(level, target, length + 1)[1:]])
            level = target
        else:
            extreme = 1.0 if seg == "spike-high" else 0.0
            up = np.linspace(level, extreme, max(2, n // 30) + 1)[1:]
            hold = np.full(max(1, n // 89), extreme)
            down = np.linspace(extreme, level, max(2, n // 30) + 1)[1:]
            out = np.concatenate([out, up, hold, down])
    return out[:n]


def _task_b_like(n: int, rng: np.random.Generator) -> np.ndarray:
    # Smooth sum of incommensurate sinusoids; the derivative of such a sum
    # has isolated zeros only, so no sampled interval is constant.
    t = np.arange(n, dtype=np.float64)
    freqs = rng.uniform(0.8, 3.2, size=3) * (1 + np.sqrt(5) / 97)
    phases = rng.uniform(0, 2 * np.pi, size=3)
    amps = rng.uniform(0.4, 1.0, size=3)
    raw = sum(a * np.sin(2 * np.pi * f * t / n + p) for a, f, p in zip(amps, freqs, phases))
    raw += 0.15 * np.sin(2 * np.pi * 0.31 * t / n + phases[0])
    lo, hi = raw.min(), raw.max()
    return (raw - lo) / (hi - lo)


def _piecewise(n: int, rng: np.random.Generator) -> np.ndarray:
    k = max(2, n // 20)
    knots_t = np.sort(rng.choice(n, size=k, replace=False))
    knots_t[0] = 0
    knots_t[-1] = n - 1
    knots_v = rng.uniform(0, 1, size=k)
    return np.interp(np.arange(n), knots_t, knots_v)


def load_signal(path, format: str = "csv") -> Signal:
    """Read a one-value-per-row CSV, tolerating a single header line.

    Values outside [0, 1] are accepted (evaluation is affine-invariant) but
    reported through a :class:`SignalRangeWarning`.
    """
    if format != "csv":
        raise ValueError(f"unsupported signal format {format!r}")
    values = []
    with open(path, newline="") as fh:
        for row_no, row in enumerate(csv.reader(fh), start=1):
            if not row or not row[0].strip():
                continue
            cell = row[0].strip()
            try:
                values.append(float(cell))
            except ValueError:
                if row_no == 1:  # header line
                    continue
                raise SignalFormatError(
                    f"unparsable value {cell!r} at row {row_no}", row=row_no
                ) from None
    if not values:
        raise InvalidSizeError(f"no numeric rows in {path}")
    arr = np.asarray(values)
    if arr.size < 3:
        raise InvalidSizeError(f"signal needs at least 3 samples, got {arr.size}")
    if arr.min() < 0.0 or arr.max() > 1.0:
        warnings.warn(
            f"{path}: values outside [0,1] (min={arr.min():g}, max={arr.max():g}); "
            "rendering will clamp",
            SignalRangeWarning,
            stacklevel=2,
        )
    return Signal(arr, name=str(path))


def save_signal(signal: Signal, path) -> None:
    """Write the one-value-per-row CSV format with a header line."""
    with open(path, "w", newline="") as fh:
        fh.write("value\n")
        for v in signal.values:
            fh.write(f"{float(v)!r}\n")


@dataclass(frozen=True)
class StimulusEntry:
    t: int
    rgb: tuple[int, int, int]
    asset_id: str


@dataclass(frozen=True)
class StimulusManifest:
    """Per-frame color swatches: one entry per signal sample, t = 1..n."""

    entries: tuple[StimulusEntry, ...] = field(default_factory=tuple)

    @property
    def n(self) -> int:
        return len(self.entries)

    def asset_for(self, t: int) -> StimulusEntry:
        return self.entries[t - 1]

    def to_json(self) -> str:
        return json.dumps(
            [{"t": e.t, "rgb": list(e.rgb), "asset_id": e.asset_id} for e in self.entries]
        )

    @classmethod
    def from_json(cls, text: str) -> "StimulusManifest":
        data = json.loads(text)
        entries = []
        for item in data:
            rgb = tuple(int(c) for c in item["rgb"])
            entries.append(StimulusEntry(int(item["t"]), rgb, str(item["asset_id"])))
        manifest = cls(tuple(entries))
        _validate_manifest(manifest)
        return manifest


def _validate_manifest(manifest: StimulusManifest) -> None:
    for pos, entry in enumerate(manifest.entries, start=1):
        if entry.t != pos:
            raise ValueError(f"manifest time index {entry.t} at position {pos} is not consecutive")
        if len(entry.rgb) != 3 or any(not (0 <= c <= 255) for c in entry.rgb):
            raise ValueError(f"bad RGB triple {entry.rgb} at t={entry.t}")


def render_stimuli(signal: Signal) -> StimulusManifest:
    """Map each sample to a green swatch: G = round(255 * clamp(value, 0, 1)).

    Asset ids are deterministic in (signal.name, t) so repeated renders refer
    to the same stimuli.
    """
    entries = []
    for idx, value in enumerate(signal.values, start=1):
        green = int(255.0 * min(max(float(value), 0.0), 1.0) + 0.5)
        entries.append(
            StimulusEntry(t=idx, rgb=(0, green, 0), asset_id=f"{signal.name}-t{idx:05d}")
        )
    return StimulusManifest(tuple(entries))
