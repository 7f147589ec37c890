"""Per-partition ARX transfer-function baseline and the order-scaling benchmark.

Each voltage partition gets its own discrete transfer function::

    I[k] = -a_1 I[k-1] - ... - a_n I[k-n] + b_0 V[k] + ... + b_m V[k-m]

fit by equation-error least squares.  The first ``max(n, m)`` rows are
discarded instead of estimating an initial-condition term.
"""

from __future__ import annotations

import statistics
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .errors import ConfigError
from .ode_extraction import PartitionSpec, assign_partitions
from .trace import Trace


@dataclass
class ARXModel:
    spec: PartitionSpec
    a: np.ndarray  # (K, n)
    b: np.ndarray  # (K, m + 1)
    dt: float | None = None
    train_range: tuple[float, float] = (0.0, 0.0)
    degenerate: list[bool] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.a.shape[1]

    @property
    def m(self) -> int:
        return self.b.shape[1] - 1

    def poles(self, k: int) -> np.ndarray:
        return np.roots(np.concatenate([[1.0], self.a[k]]))

    @property
    def stable(self) -> list[bool]:
        return [bool(np.all(np.abs(self.poles(k)) < 1.0)) for k in range(self.spec.K)]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "dt": self.dt,
            "partition_edges": self.spec.edges.tolist(),
            "a": self.a.tolist(),
            "b": self.b.tolist(),
            "stable": self.stable,
            "degenerate": self.degenerate,
            "train_range": list(self.train_range),
        }


def arx_regressors(I, V, n: int, m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Design matrix, target and row index for every usable sample."""
    I = np.asarray(I, dtype=float)
    V = np.asarray(V, dtype=float)
    start = max(n, m)
    rows = np.arange(start, len(I))
    cols = [-I[rows - j] for j in range(1, n + 1)] + [V[rows - j] for j in range(m + 1)]
    return np.column_stack(cols), I[rows], rows


def fit_arx(I, V, partitions, n: int = 1, m: int = 1, spec: PartitionSpec | None = None, parallel: bool = False) -> ARXModel:
    """Least-squares ARX fit per partition; ``partitions`` indexes each sample by V[k]."""
    if n < 1 or m < 0:
        raise ConfigError(f"need n >= 1 and m >= 0, got n={n}, m={m}")
    I = np.asarray(I, dtype=float)
    partitions = np.asarray(partitions)
    X, y, rows = arx_regressors(I, V, n, m)
    K = int(partitions.max()) + 1 if spec is None else spec.K
    if spec is None:
        spec = PartitionSpec(np.arange(K + 1, dtype=float))
    pidx = partitions[rows]
    need = n + m + 1

    def one(k):
        sel = pidx == k
        if sel.sum() < need:
            return None
        Xk = X[sel]
        scale = np.linalg.norm(Xk, axis=0)
        scale[scale == 0] = 1.0
        theta = np.linalg.lstsq(Xk / scale, y[sel], rcond=None)[0] / scale
        return theta

    if parallel:
        with ThreadPoolExecutor() as ex:
            thetas = list(ex.map(one, range(K)))
    else:
        thetas = [one(k) for k in range(K)]
    populated = [k for k, th in enumerate(thetas) if th is not None]
    if not populated:
        raise ConfigError("no partition has enough samples for an ARX fit")
    degenerate = []
    for k in range(K):
        degenerate.append(thetas[k] is None)
        if thetas[k] is None:
            thetas[k] = thetas[min(populated, key=lambda j: (abs(j - k), j))]
    theta = np.vstack(thetas)
    return ARXModel(spec, theta[:, :n], theta[:, n:], None, (float(I.min()), float(I.max())), degenerate)


def fit_arx_trace(trace: Trace, spec: PartitionSpec, n: int = 1, m: int = 1, parallel: bool = False) -> ARXModel:
    model = fit_arx(trace.i, trace.v, assign_partitions(spec, trace.v), n, m, spec, parallel)
    model.dt = trace.dt
    return model


def simulate_arx(model: ARXModel, voltage: Trace, init=None) -> Trace:
    """Free-run simulation; outputs are fed back, partitions follow V[k].

    ``init`` supplies the first ``max(n, m)`` outputs (defaults to zeros);
    earlier voltages are taken equal to the first sample.
    """
    n, m = model.n, model.m
    start = max(n, m)
    v = voltage.v
    N = len(v)
    out = np.zeros(N)
    if init is not None:
        init = np.atleast_1d(np.asarray(init, dtype=float))
        out[: min(start, len(init), N)] = init[: min(start, N)]
    idx = assign_partitions(model.spec, v)
    a, b = model.a.tolist(), model.b.tolist()
    y = out.tolist()
    vl = v.tolist()
    for k in range(start, N):
        p = idx[k]
        ap, bp = a[p], b[p]
        acc = 0.0
        for j in range(n):
            acc -= ap[j] * y[k - 1 - j]
        for j in range(m + 1):
            acc += bp[j] * vl[k - j]
        y[k] = acc
    out = np.asarray(y)
    lo, hi = model.train_range
    scale = max(hi - lo, abs(lo), abs(hi), 1e-12)
    diverged = bool(np.any(np.abs(out) > 10 * scale) or not np.all(np.isfinite(out)))
    if diverged:
        warnings.warn("ARX simulation exceeded 10x the training current scale; an unstable partition is likely", stacklevel=2)
    return Trace(voltage.t, v, out, {**voltage.meta, "predicted_by": "arx", "diverged": diverged})


def one_step_arx(model: ARXModel, trace: Trace) -> np.ndarray:
    """One-step-ahead prediction from measured past outputs."""
    X, _, rows = arx_regressors(trace.i, trace.v, model.n, model.m)
    idx = assign_partitions(model.spec, trace.v)[rows]
    theta = np.hstack([model.a, model.b])[idx]
    pred = np.array(trace.i, dtype=float)
    pred[rows] = np.einsum("ij,ij->i", X, theta)
    return pred


@dataclass
class BenchmarkRow:
    method: str
    order: int
    median_seconds: float
    runs: list[float]


def benchmark_orders(trainer: Callable[[int], object], orders: Iterable[int], method: str, repeats: int = 5) -> list[BenchmarkRow]:
    """Median wall-clock time of ``trainer(order)`` over ``repeats`` runs per order.

    Runs are serialised so timings are not skewed by contention.
    """
    if repeats < 1:
        raise ConfigError("repeats must be >= 1")
    rows = []
    for order in orders:
        runs = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            trainer(order)
            runs.append(time.perf_counter() - t0)
        rows.append(BenchmarkRow(method, int(order), statistics.median(runs), runs))
    return rows
