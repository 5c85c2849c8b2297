"""Flight traces on disk, sliding windows, labels, normalization, splits.

The trace CSV contract (version 1):

* line 1: ``# aeroguard-trace v1; rate_hz=<int>; crash_class=<0..15>; seed=<u64>``
* line 2: column names, first ``t``, last ``phase``
* data rows: time with 6 decimals, channel values with 9 significant digits
  (lossless for float32), phase letter in {U, H, F, P}
* UTF-8, LF line endings

Phases: U upflight, H hover, F fault transition, P post-crash.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ChannelError,
    ContractError,
    DegenerateChannelError,
    FormatError,
    NumericError,
)

TRACE_MAGIC = "# aeroguard-trace v1"

# canonical sensor channel order produced by the simulator
CHANNELS = (
    "acc_x", "acc_y", "acc_z",          # body-frame specific force
    "gyro_x", "gyro_y", "gyro_z",       # body-frame angular velocity
    "angacc_x", "angacc_y", "angacc_z", # body-frame angular acceleration
    "vel_x", "vel_y", "vel_z",          # world-frame linear velocity
    "pos_x", "pos_y", "pos_z",          # world-frame position
    "roll", "pitch", "yaw",             # Euler angles
)

PHASES = ("U", "H", "F", "P")

NUM_CRASH_CLASSES = 15  # non-empty subsets of four rotors; 0 means no fault


@dataclass
class FlightTrace:
    """One flight's decimated sensor log."""

    trace_id: int
    rate_hz: int
    channel_names: tuple
    samples: np.ndarray  # [T, C] float32
    phase: np.ndarray    # [T] single characters from PHASES
    crash_class: int     # 0..15, 0 = no fault
    seed: int

    def __post_init__(self):
        if self.samples.ndim != 2 or self.samples.shape[1] != len(self.channel_names):
            raise ContractError(
                f"trace samples {self.samples.shape} do not match "
                f"{len(self.channel_names)} channels"
            )
        if len(self.phase) != len(self.samples):
            raise ContractError("phase labels and samples have different lengths")
        if not 0 <= self.crash_class <= NUM_CRASH_CLASSES:
            raise ContractError(f"crash_class {self.crash_class} outside 0..15")

    @property
    def length(self):
        return self.samples.shape[0]


def save_trace(trace: FlightTrace, path):
    """Write a trace in the v1 CSV format."""
    rows = [
        f"{TRACE_MAGIC}; rate_hz={trace.rate_hz}; "
        f"crash_class={trace.crash_class}; seed={trace.seed}",
        ",".join(("t",) + tuple(trace.channel_names) + ("phase",)),
    ]
    rate = trace.rate_hz
    vals = trace.samples
    for i in range(trace.length):
        cells = [f"{i / rate:.6f}"]
        cells.extend(f"{float(v):.9g}" for v in vals[i])
        cells.append(str(trace.phase[i]))
        rows.append(",".join(cells))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(rows))
        fh.write("\n")


def load_trace(path, trace_id=0) -> FlightTrace:
    """Parse a v1 trace CSV; malformed input raises FormatError with the
    offending line number."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith(TRACE_MAGIC + ";"):
        raise FormatError(f"{path}: line 1: missing '{TRACE_MAGIC}' header")
    meta = {}
    for part in lines[0].split(";")[1:]:
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise FormatError(f"{path}: line 1: bad header field {part!r}")
        key, val = part.split("=", 1)
        meta[key.strip()] = val.strip()
    try:
        rate_hz = int(meta["rate_hz"])
        crash_class = int(meta["crash_class"])
        seed = int(meta["seed"])
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: line 1: incomplete header ({exc})") from exc
    if not 0 <= crash_class <= NUM_CRASH_CLASSES:
        raise FormatError(f"{path}: line 1: crash_class {crash_class} outside 0..15")
    if len(lines) < 2:
        raise FormatError(f"{path}: line 2: missing column header")
    cols = lines[1].split(",")
    if len(cols) < 3 or cols[0] != "t" or cols[-1] != "phase":
        raise FormatError(
            f"{path}: line 2: columns must start with 't' and end with 'phase'"
        )
    channel_names = tuple(cols[1:-1])
    ncols = len(cols)
    samples = []
    phases = []
    for lineno, line in enumerate(lines[2:], start=3):
        if not line:
            continue
        cells = line.split(",")
        if len(cells) != ncols:
            raise FormatError(
                f"{path}: line {lineno}: expected {ncols} cells, got {len(cells)}"
            )
        if cells[-1] not in PHASES:
            raise FormatError(f"{path}: line {lineno}: bad phase {cells[-1]!r}")
        try:
            samples.append([float(c) for c in cells[1:-1]])
        except ValueError as exc:
            raise FormatError(f"{path}: line {lineno}: {exc}") from exc
        phases.append(cells[-1])
    if not samples:
        raise FormatError(f"{path}: no data rows")
    return FlightTrace(
        trace_id=trace_id,
        rate_hz=rate_hz,
        channel_names=channel_names,
        samples=np.asarray(samples, dtype=np.float32),
        phase=np.asarray(phases),
        crash_class=crash_class,
        seed=seed,
    )


def select_channels(trace: FlightTrace, names) -> FlightTrace:
    """Project a trace onto a channel subset, in the requested order."""
    idx = []
    for name in names:
        if name not in trace.channel_names:
            raise ChannelError(
                f"unknown channel {name!r}; trace has {', '.join(trace.channel_names)}"
            )
        idx.append(trace.channel_names.index(name))
    return FlightTrace(
        trace_id=trace.trace_id,
        rate_hz=trace.rate_hz,
        channel_names=tuple(names),
        samples=np.ascontiguousarray(trace.samples[:, idx]),
        phase=trace.phase,
        crash_class=trace.crash_class,
        seed=trace.seed,
    )


@dataclass
class Window:
    """A fixed-length slice of one trace.

    ``kind`` is "normal" (entirely pre-fault), "fault" (at least half the
    samples lie in the transition region; ``label`` holds the crash class),
    or "mixed" (touches the transition or post-crash region without meeting
    the 50% rule; used by neither training set).
    """

    values: np.ndarray  # [W, C] float32
    start: int
    flight_id: int
    label: int = 0
    kind: str = "normal"
    normalized: bool = False


def window_count(length, window, stride):
    return (length - window) // stride + 1


def segment(trace: FlightTrace, window: int, stride: int = 10):
    """Cut a trace into overlapping windows (tail that does not fill a
    window is dropped)."""
    if window < 1 or stride < 1:
        raise ContractError(f"window {window} and stride {stride} must be positive")
    if trace.length < window:
        raise ContractError(
            f"trace length {trace.length} shorter than window {window}"
        )
    out = []
    for j in range(window_count(trace.length, window, stride)):
        start = j * stride
        out.append(
            Window(
                values=trace.samples[start : start + window].copy(),
                start=start,
                flight_id=trace.trace_id,
            )
        )
    return out


def label_windows(windows, trace: FlightTrace):
    """Assign labels by overlap with the fault-transition region.

    A window gets the trace's crash class iff at least 50% of its samples
    carry phase F.  Windows made purely of U/H samples are normal; anything
    else (small overlap, post-crash content) is marked mixed and excluded
    from training sets.
    """
    phase = trace.phase
    for w in windows:
        seg = phase[w.start : w.start + len(w.values)]
        n_fault = int(np.sum(seg == "F"))
        if 2 * n_fault >= len(w.values):
            if trace.crash_class == 0:
                raise ContractError(
                    f"trace {trace.trace_id}: fault phase present but crash_class is 0"
                )
            w.label = trace.crash_class
            w.kind = "fault"
        elif bool(np.all((seg == "U") | (seg == "H"))):
            w.label = 0
            w.kind = "normal"
        else:
            w.label = 0
            w.kind = "mixed"
    return windows


def stack_windows(windows):
    """Stack a window list into ([N, W, C] float32 values, [N] int labels)."""
    if not windows:
        raise ContractError("stack_windows: empty window list")
    values = np.stack([w.values for w in windows]).astype(np.float32)
    labels = np.array([w.label for w in windows], dtype=np.int64)
    return values, labels


@dataclass
class NormStats:
    """Per-channel mean and population standard deviation."""

    mean: np.ndarray
    std: np.ndarray
    channel_names: tuple = field(default_factory=tuple)


def fit_normalization(values, channel_names=None) -> NormStats:
    """Fit per-channel stats over an [N, W, C] (or [T, C]) array.

    Uses the population standard deviation.  A channel whose std is below
    1e-12 cannot be scaled and raises DegenerateChannelError naming it.
    """
    arr = np.asarray(values, dtype=np.float64)
    flat = arr.reshape(-1, arr.shape[-1])
    if not np.isfinite(flat).all():
        raise NumericError("normalization input contains non-finite values")
    mean = flat.mean(axis=0)
    std = flat.std(axis=0)  # ddof=0
    bad = np.flatnonzero(std < 1e-12)
    if bad.size:
        names = (
            ", ".join(channel_names[i] for i in bad)
            if channel_names
            else ", ".join(str(i) for i in bad)
        )
        raise DegenerateChannelError(f"zero-variance channel(s): {names}")
    return NormStats(mean=mean, std=std,
                     channel_names=tuple(channel_names or ()))


def apply_normalization(values, stats: NormStats):
    """Z-score an array with previously fitted stats; returns float32."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape[-1] != stats.mean.shape[0]:
        raise ContractError(
            f"array has {arr.shape[-1]} channels, stats cover {stats.mean.shape[0]}"
        )
    return ((arr - stats.mean) / stats.std).astype(np.float32)


def normalize_windows(windows, stats: NormStats):
    for w in windows:
        w.values = apply_normalization(w.values, stats)
        w.normalized = True
    return windows


def split_flights(traces, fraction=0.7, seed=0):
    """Deterministic stratified split at flight granularity.

    Per-class train counts follow the largest-remainder rule so the global
    train fraction is met exactly (floor(N*f + 0.5)) while every class stays
    within one flight of its proportional share.  Classes with fewer than
    two flights trigger a warning and a plain global split.
    """
    if not 0.0 < fraction < 1.0:
        raise ContractError(f"split fraction must be in (0, 1), got {fraction}")
    traces = list(traces)
    if len(traces) < 2:
        raise ContractError("need at least two flights to split")
    by_class = {}
    for tr in traces:
        by_class.setdefault(tr.crash_class, []).append(tr)
    if any(len(v) < 2 for v in by_class.values()):
        warnings.warn(
            "a crash class has fewer than two flights; falling back to an "
            "unstratified split",
            stacklevel=2,
        )
        by_class = {0: traces}

    total_train = int(math.floor(len(traces) * fraction + 0.5))
    classes = sorted(by_class)
    base = {c: int(math.floor(len(by_class[c]) * fraction)) for c in classes}
    rem = {c: len(by_class[c]) * fraction - base[c] for c in classes}
    extras = total_train - sum(base.values())
    for c in sorted(classes, key=lambda c: (-rem[c], c)):
        if extras <= 0:
            break
        if base[c] < len(by_class[c]):
            base[c] += 1
            extras -= 1

    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in classes:
        group = list(by_class[c])
        order = rng.permutation(len(group))
        take = base[c]
        for pos, j in enumerate(order):
            (train if pos < take else test).append(group[j])
    return train, test
