"""Voltage-partitioned linear ODE extraction.

Per voltage interval the model is::

    I = A V + B dI/dt + C d2I/dt2 + ... + offset

fit by ordinary least squares with the current on the left-hand side and
the time derivatives taken analytically from a smoothing spline of I(t).
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .bspline import make_uniform_basis
from .errors import ConfigError
from .smoothing import SmoothFit, evaluate, fit_penalized, select_lambda_ocv
from .trace import Trace

log = logging.getLogger(__name__)

MAX_ORDER = 4


@dataclass(frozen=True)
class PartitionSpec:
    """Ascending voltage edges defining ``K = len(edges) - 1`` intervals."""

    edges: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=float)
        if e.ndim != 1 or len(e) < 2:
            raise ConfigError("partition spec needs at least two edges")
        if np.any(np.diff(e) <= 0):
            raise ConfigError("partition edges must be strictly increasing")
        object.__setattr__(self, "edges", e)

    @property
    def K(self) -> int:
        return len(self.edges) - 1

    @classmethod
    def uniform(cls, lo: float, hi: float, K: int = 20) -> "PartitionSpec":
        if K < 1:
            raise ConfigError("K must be a positive integer")
        return cls(np.linspace(lo, hi, K + 1))

    @classmethod
    def from_data(cls, v, K: int = 20) -> "PartitionSpec":
        """``K`` equal intervals over the observed range of ``v``."""
        v = np.asarray(v, dtype=float)
        lo, hi = float(v.min()), float(v.max())
        if hi <= lo:
            # constant voltage: a single nominal-width interval around it
            lo, hi = lo - 0.005, hi + 0.005
        return cls.uniform(lo, hi, K)

    def to_dict(self) -> dict:
        return {"edges": self.edges.tolist()}


def assign_partitions(spec: PartitionSpec, v) -> np.ndarray:
    """Interval index per sample; half-open intervals, the last one closed.

    Samples outside the edges are clamped to the end partitions.
    """
    v = np.asarray(v, dtype=float)
    idx = np.searchsorted(spec.edges, v, side="right") - 1
    return np.clip(idx, 0, spec.K - 1)


def coefficient_names(order: int) -> list[str]:
    """``A`` (voltage), one letter per derivative, then the offset."""
    return [chr(ord("A") + j) for j in range(order + 2)]


@dataclass
class PartitionFit:
    coefficients: np.ndarray  # [A, B_1..B_order, offset]
    n_samples: int
    sse: float = 0.0
    degenerate: bool = False
    inherited_from: int | None = None
    voltage_dropped: bool = False
    rank_deficient: bool = False

    @property
    def order(self) -> int:
        return len(self.coefficients) - 2

    @property
    def A(self) -> float:
        return float(self.coefficients[0])

    @property
    def B(self) -> float:
        return float(self.coefficients[1])

    @property
    def offset(self) -> float:
        return float(self.coefficients[-1])

    @property
    def stable(self) -> bool:
        # dI/dt = (I - A V - C) / B decays only for B < 0
        return self.B < 0

    def to_dict(self) -> dict:
        return {
            "coefficients": dict(zip(coefficient_names(self.order), map(float, self.coefficients))),
            "n_samples": int(self.n_samples),
            "sse": float(self.sse),
            "degenerate": self.degenerate,
            "inherited_from": self.inherited_from,
            "voltage_dropped": self.voltage_dropped,
            "rank_deficient": self.rank_deficient,
            "stable": self.stable,
        }

    @classmethod
    def from_dict(cls, d: dict, order: int) -> "PartitionFit":
        names = coefficient_names(order)
        return cls(
            coefficients=np.array([d["coefficients"][k] for k in names], dtype=float),
            n_samples=int(d["n_samples"]),
            sse=float(d["sse"]),
            degenerate=bool(d["degenerate"]),
            inherited_from=d["inherited_from"],
            voltage_dropped=bool(d["voltage_dropped"]),
            rank_deficient=bool(d["rank_deficient"]),
        )


@dataclass
class PartitionedODEModel:
    spec: PartitionSpec
    order: int
    partitions: list[PartitionFit]
    smoothing: SmoothFit | None = None
    dt: float | None = None
    meta: dict = field(default_factory=dict)

    def coefficient_matrix(self) -> np.ndarray:
        return np.vstack([p.coefficients for p in self.partitions])

    def predict(self, v, derivs) -> np.ndarray:
        """Regression prediction ``A V + sum B_j D^j I + offset`` per sample."""
        v = np.asarray(v, dtype=float)
        derivs = np.asarray(derivs, dtype=float).reshape(len(v), -1)[:, : self.order]
        coef = self.coefficient_matrix()[assign_partitions(self.spec, v)]
        X = np.column_stack([v, derivs, np.ones_like(v)])
        return np.einsum("ij,ij->i", X, coef)

    def to_dict(self) -> dict:
        return {
            "order": self.order,
            "dt": self.dt,
            "coefficient_names": coefficient_names(self.order),
            "partition_edges": self.spec.edges.tolist(),
            "partitions": [p.to_dict() for p in self.partitions],
            "smoothing": None if self.smoothing is None else self.smoothing.to_dict(),
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PartitionedODEModel":
        order = int(d["order"])
        return cls(
            spec=PartitionSpec(np.asarray(d["partition_edges"], dtype=float)),
            order=order,
            partitions=[PartitionFit.from_dict(p, order) for p in d["partitions"]],
            smoothing=None if d.get("smoothing") is None else SmoothFit.from_dict(d["smoothing"]),
            dt=d.get("dt"),
            meta=d.get("meta", {}),
        )


def compute_derivatives(fit: SmoothFit, t, max_order: int) -> np.ndarray:
    """Columns ``dI/dt .. d^k I/dt^k`` from the spline, shape ``(n, max_order)``."""
    if not 1 <= max_order <= MAX_ORDER:
        raise ConfigError(f"derivative order must be in 1..{MAX_ORDER}, got {max_order}")
    if max_order > fit.basis.degree:
        raise ConfigError(
            f"derivative order {max_order} exceeds spline degree {fit.basis.degree}; "
            f"refit with a spline of order at least {max_order + 1}"
        )
    return np.column_stack([evaluate(fit, t, k) for k in range(1, max_order + 1)])


def _lstsq(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, int]:
    # column scaling keeps the rank test meaningful across unit scales
    scale = np.linalg.norm(X, axis=0)
    scale[scale == 0] = 1.0
    coef, _, rank, _ = np.linalg.lstsq(X / scale, y, rcond=None)
    return coef / scale, rank


def fit_partition_ode(I, V, derivs, order: int) -> PartitionFit:
    """Least squares of ``I`` on ``[V, dI/dt, .., d^order I/dt^order, 1]``.

    If the design is rank deficient (typically constant V under step
    excitation) the voltage column is dropped and ``A = 0``.
    """
    I = np.asarray(I, dtype=float)
    V = np.asarray(V, dtype=float)
    D = np.asarray(derivs, dtype=float).reshape(len(I), -1)[:, :order]
    if D.shape[1] < order:
        raise ConfigError(f"need {order} derivative columns, got {D.shape[1]}")
    if len(I) < order + 2:
        raise ConfigError(f"need at least {order + 2} samples, got {len(I)}")
    ones = np.ones_like(I)
    X = np.column_stack([V, D, ones])
    coef, rank = _lstsq(X, I)
    dropped = False
    if rank < X.shape[1]:
        dropped = True
        coef_r, rank = _lstsq(X[:, 1:], I)
        coef = np.concatenate([[0.0], coef_r])
        X = np.column_stack([np.zeros_like(V), D, ones])
    resid = I - X @ coef
    return PartitionFit(
        coefficients=coef,
        n_samples=len(I),
        sse=float(resid @ resid),
        voltage_dropped=dropped,
        rank_deficient=rank < (X.shape[1] - (1 if dropped else 0)),
    )


def _inherit(fits: list[PartitionFit | None], counts: np.ndarray) -> list[PartitionFit]:
    populated = [k for k, f in enumerate(fits) if f is not None]
    if not populated:
        raise ConfigError("no partition has enough samples for a fit")
    out = []
    for k, f in enumerate(fits):
        if f is not None:
            out.append(f)
            continue
        # nearest populated partition; ties go to the lower index
        src = min(populated, key=lambda j: (abs(j - k), j))
        out.append(replace(fits[src], n_samples=int(counts[k]), sse=0.0, degenerate=True, inherited_from=src))
    return out


def fit_partitions(I, V, derivs, spec: PartitionSpec, order: int, parallel: bool = False) -> list[PartitionFit]:
    idx = assign_partitions(spec, V)
    counts = np.bincount(idx, minlength=spec.K)

    def one(k):
        if counts[k] < order + 2:
            return None
        m = idx == k
        return fit_partition_ode(I[m], V[m], derivs[m], order)

    if parallel:
        with ThreadPoolExecutor() as ex:
            fits = list(ex.map(one, range(spec.K)))
    else:
        fits = [one(k) for k in range(spec.K)]
    for k, f in enumerate(fits):
        if f is None:
            log.info("partition %d has %d samples; inheriting coefficients", k, counts[k])
    return _inherit(fits, counts)


@dataclass(frozen=True)
class TimeSmoothing:
    """Time-domain smoothing settings for derivative extraction."""

    knot_spacing: float = 1.5e-3
    degree: int = 3
    penalty_order: int = 2
    lambda_grid: tuple[float, ...] = tuple(float(v) for v in np.logspace(-16, -6, 11))
    lam: float | None = None  # fixed lambda; skips cross validation

    def basis_for(self, t0: float, t1: float):
        grid = max(2, int(round((t1 - t0) / self.knot_spacing)))
        return make_uniform_basis(t0, t1, grid, self.degree)


def smooth_current(trace: Trace, cfg: TimeSmoothing) -> tuple[SmoothFit, list[float]]:
    """Penalised spline of I(t); lambda by OCV unless fixed in ``cfg``."""
    if trace.i is None:
        raise ConfigError("trace has no current column")
    basis = cfg.basis_for(trace.t[0], trace.t[-1])
    scores: list[float] = []
    lam = cfg.lam
    if lam is None:
        lam, scores = select_lambda_ocv(basis, trace.t, trace.i, cfg.penalty_order, list(cfg.lambda_grid))
    fit = fit_penalized(basis, trace.t, trace.i, lam, cfg.penalty_order, "time")
    return fit, scores


def extract_model(
    trace: Trace,
    smoothing: TimeSmoothing = TimeSmoothing(),
    spec: PartitionSpec | None = None,
    order: int = 1,
    K: int = 20,
    parallel: bool = False,
    fit: SmoothFit | None = None,
) -> PartitionedODEModel:
    """Smooth I(t), differentiate, partition by voltage and regress per partition.

    ``trace`` should already be trimmed of its start-up transient.  A
    precomputed time-domain ``fit`` may be passed to skip smoothing.
    """
    if not 1 <= order <= MAX_ORDER:
        raise ConfigError(f"ODE order must be in 1..{MAX_ORDER}, got {order}")
    if trace.i is None:
        raise ConfigError("trace has no current column")
    scores: list[float] = []
    if fit is None:
        fit, scores = smooth_current(trace, smoothing)
    derivs = compute_derivatives(fit, trace.t, order)
    spec = PartitionSpec.from_data(trace.v, K) if spec is None else spec
    parts = fit_partitions(trace.i, trace.v, derivs, spec, order, parallel)
    meta = {"lambda": fit.lam, "ocv_scores": scores, "n_samples": len(trace)}
    return PartitionedODEModel(spec, order, parts, fit, trace.dt, meta)


def in_sample_prediction(model: PartitionedODEModel, trace: Trace) -> np.ndarray:
    """Aggregate regression prediction on the data the model was fit to."""
    if model.smoothing is None:
        raise ConfigError("model carries no smoothing spline")
    derivs = compute_derivatives(model.smoothing, trace.t, model.order)
    return model.predict(trace.v, derivs)
