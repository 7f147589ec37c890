"""Uniformly sampled (t, v, i) traces and their CSV form."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import TraceError

JITTER_TOL = 1e-9
CSV_FMT = "%.9g"


@dataclass(frozen=True)
class Trace:
    t: np.ndarray
    v: np.ndarray
    i: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if t.ndim != 1 or t.shape != v.shape:
            raise TraceError("t and v must be 1-D arrays of equal length")
        if len(t) < 2:
            raise TraceError("a trace needs at least two samples")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise TraceError("trace contains non-finite values")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "v", v)
        if self.i is not None:
            i = np.asarray(self.i, dtype=float)
            if i.shape != t.shape:
                raise TraceError("current column length differs from time column")
            if not np.all(np.isfinite(i)):
                raise TraceError("trace contains non-finite values")
            object.__setattr__(self, "i", i)
        steps = np.diff(t)
        dt = (t[-1] - t[0]) / (len(t) - 1)
        if dt <= 0 or np.max(np.abs(steps - dt)) > JITTER_TOL:
            raise TraceError(f"trace is not uniformly sampled (max jitter {np.max(np.abs(steps - dt)):.3g} s)")

    def __len__(self) -> int:
        return len(self.t)

    @property
    def dt(self) -> float:
        return float((self.t[-1] - self.t[0]) / (len(self.t) - 1))

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0])

    def with_current(self, i, **meta) -> "Trace":
        return replace(self, i=np.asarray(i, dtype=float), meta={**self.meta, **meta})

    def trim(self, seconds: float) -> "Trace":
        """Drop the first ``ceil(seconds / dt)`` samples."""
        if seconds <= 0:
            return replace(self, meta={**self.meta, "trim_applied": 0.0})
        k = math.ceil(seconds / self.dt - 1e-9)
        if k >= len(self) - 1:
            raise TraceError(f"trim of {seconds} s leaves fewer than two samples")
        return Trace(
            self.t[k:],
            self.v[k:],
            None if self.i is None else self.i[k:],
            {**self.meta, "trim_applied": float(seconds)},
        )


def meta_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.json")


def write_trace(trace: Trace, path, write_meta: bool = True) -> Path:
    """Write ``t,v,i`` CSV (9 significant digits) plus a ``.meta.json`` sidecar."""
    path = Path(path)
    cols = [trace.t, trace.v]
    header = "t,v"
    if trace.i is not None:
        cols.append(trace.i)
        header = "t,v,i"
    np.savetxt(path, np.column_stack(cols), fmt=CSV_FMT, delimiter=",", header=header, comments="")
    if write_meta:
        meta_path(path).write_text(json.dumps(trace.meta, indent=2, sort_keys=True) + "\n")
    return path


def read_trace(path) -> Trace:
    path = Path(path)
    with path.open() as fh:
        header = fh.readline().strip()
    names = header.split(",")
    if names not in (["t", "v"], ["t", "v", "i"]):
        raise TraceError(f"{path}: unknown trace schema {header!r}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    meta = {}
    if meta_path(path).exists():
        meta = json.loads(meta_path(path).read_text())
    return Trace(data[:, 0], data[:, 1], data[:, 2] if len(names) == 3 else None, meta)
