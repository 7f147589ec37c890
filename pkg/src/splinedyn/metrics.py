"""Goodness-of-fit metrics and comparison tables."""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError

SPLINE_METHOD = "spline-ode"
BASELINE_METHOD = "arx"

# published figures for a 36-house detailed-plant study; context only, not reproduced here
REFERENCE_FIGURES = {
    "spline validation GoF (%)": 98.74,
    "SysID validation GoF (%)": 99.03,
    "spline training GoF (%)": 99.31,
    "SysID training GoF (%)": 99.65,
}


def _pair(measured, predicted) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(measured, dtype=float).ravel()
    yh = np.asarray(predicted, dtype=float).ravel()
    if y.shape != yh.shape:
        raise ConfigError(f"series lengths differ ({len(y)} != {len(yh)})")
    if len(y) < 2:
        raise ConfigError("need at least two samples")
    return y, yh


def rmse(measured, predicted) -> float:
    y, yh = _pair(measured, predicted)
    return float(np.sqrt(np.mean((y - yh) ** 2)))


def nrmse(measured, predicted) -> float:
    """RMSE divided by the range of the measured series."""
    y, yh = _pair(measured, predicted)
    span = float(y.max() - y.min())
    if span == 0:
        raise ConfigError("measured series is constant; NRMSE is undefined")
    return rmse(y, yh) / span


def gof(measured, predicted) -> float:
    """Goodness of fit in percent, ``(1 - NRMSE) * 100``."""
    return (1.0 - nrmse(measured, predicted)) * 100.0


@dataclass
class FitReport:
    method: str
    order: int
    n_partitions: int
    gof_percent: float
    nrmse: float
    rmse: float
    n_samples: int
    runtime_seconds: float = 0.0
    label: str = ""

    @classmethod
    def from_series(cls, measured, predicted, method: str, order: int, n_partitions: int, runtime_seconds: float = 0.0, label: str = "") -> "FitReport":
        e = nrmse(measured, predicted)
        return cls(method, order, n_partitions, (1.0 - e) * 100.0, e, rmse(measured, predicted), len(np.ravel(measured)), runtime_seconds, label)

    def to_dict(self, include_runtime: bool = True) -> dict:
        d = asdict(self)
        if not include_runtime:
            d.pop("runtime_seconds")
        return d


def speedup(baseline_seconds: float, spline_seconds: float) -> float:
    """How many times faster the spline pipeline ran than the baseline."""
    return baseline_seconds / spline_seconds


def compare_report(reports: list[FitReport]) -> list[dict]:
    """Rows sorted by (method, order, label) with a speedup column.

    The speedup sits on spline rows that have a baseline report of the same
    order and is blank otherwise.
    """
    rows = []
    base = {r.order: r.runtime_seconds for r in reports if r.method == BASELINE_METHOD}
    for r in sorted(reports, key=lambda r: (r.method, r.order, r.label)):
        s = ""
        if r.method == SPLINE_METHOD and r.order in base and r.runtime_seconds > 0:
            s = round(speedup(base[r.order], r.runtime_seconds), 2)
        rows.append({**r.to_dict(), "speedup": s})
    return rows


COLUMNS = ["method", "label", "order", "n_partitions", "n_samples", "gof_percent", "nrmse", "rmse", "runtime_seconds", "speedup"]


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def rows_to_csv(rows: list[dict], columns: list[str] = COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c, "")) for c in columns])
    return buf.getvalue()


def rows_to_text(rows: list[dict], columns: list[str] = COLUMNS, footer: bool = True) -> str:
    cells = [columns] + [[_fmt(r.get(c, "")) for c in columns] for r in rows]
    widths = [max(len(row[j]) for row in cells) for j in range(len(columns))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    if footer:
        lines.append("")
        lines.append("reference figures (detailed-plant study, context only): " + ", ".join(f"{k} {v}" for k, v in REFERENCE_FIGURES.items()))
    return "\n".join(lines) + "\n"
