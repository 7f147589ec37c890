"""End-to-end experiment steps shared by the CLI and the acceptance tests."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .bspline import make_uniform_basis
from .config import PipelineConfig
from .discrete import DiscreteModel, discretize, simulate
from .errors import ConfigError
from .metrics import BASELINE_METHOD, SPLINE_METHOD, FitReport, gof
from .ode_extraction import (
    PartitionedODEModel,
    PartitionSpec,
    compute_derivatives,
    extract_model,
)
from .plant import simulate_plant
from .signals import gen_log_square_chirp, gen_square_step
from .smoothing import SmoothFit, evaluate, fit_ocv
from .sysid import ARXModel, benchmark_orders, fit_arx_trace, one_step_arx, simulate_arx
from .trace import Trace

MODEL_FORMAT = "splinedyn-model/1"


def generate(cfg: PipelineConfig) -> tuple[Trace, Trace]:
    """Chirp training and step validation experiments through the surrogate plant.

    Traces are returned untrimmed; the recommended trim is recorded in meta.
    """
    cfg.validate()
    meta = {"trim_seconds": cfg.trim_seconds, "transient_included": True}
    train = simulate_plant(cfg.plant.plant(cfg.seed), gen_log_square_chirp(cfg.chirp))
    valid = simulate_plant(cfg.plant.plant(cfg.seed + 1), gen_square_step(cfg.step))
    return (
        replace(train, meta={**train.meta, **meta, "role": "training"}),
        replace(valid, meta={**valid.meta, **meta, "role": "validation"}),
    )


def partition_spec(cfg: PipelineConfig, trace: Trace) -> PartitionSpec:
    p = cfg.partitions
    if p.lo is not None:
        return PartitionSpec.uniform(p.lo, p.hi, p.K)
    return PartitionSpec.from_data(trace.v, p.K)


def fit_static_curve(cfg: PipelineConfig, trace: Trace) -> SmoothFit:
    """Current as a smooth function of voltage (20 cubic B-splines by default)."""
    vf = cfg.voltage_fit
    basis = make_uniform_basis(float(trace.v.min()), float(trace.v.max()), vf.grid_size, vf.degree)
    fit, _ = fit_ocv(basis, trace.v, trace.i, vf.penalty_order, list(vf.lambda_grid), "voltage")
    return fit


@dataclass
class FitResult:
    model: PartitionedODEModel
    report: FitReport
    discrete: DiscreteModel | None
    static_curve: SmoothFit | None
    static_gof: float | None
    trace: Trace  # trimmed training data


def fit(cfg: PipelineConfig, trace: Trace, static_curve: bool = True) -> FitResult:
    """Trim, smooth, differentiate, partition and regress; report in-sample GoF."""
    cfg.validate()
    if trace.i is None:
        raise ConfigError("training trace has no current column")
    data = trace.trim(cfg.trim_seconds)
    t0 = time.perf_counter()
    model = extract_model(data, cfg.smoothing, partition_spec(cfg, data), cfg.order, cfg.partitions.K, cfg.parallel)
    runtime = time.perf_counter() - t0
    derivs = compute_derivatives(model.smoothing, data.t, model.order)
    pred = model.predict(data.v, derivs)
    report = FitReport.from_series(data.i, pred, SPLINE_METHOD, cfg.order, model.spec.K, runtime, "training in-sample")
    dm = discretize(model, data.dt) if cfg.order == 1 else None
    sc = sg = None
    if static_curve:
        sc = fit_static_curve(cfg, data)
        sg = gof(data.i, evaluate(sc, data.v))
    return FitResult(model, report, dm, sc, sg, data)


def validate(model: PartitionedODEModel, trace: Trace, trim_seconds: float, label: str = "validation") -> tuple[FitReport, Trace]:
    """Backward-Euler free run over ``trace`` starting from its first measured sample."""
    if trace.i is None:
        raise ConfigError("validation trace has no current column")
    data = trace.trim(trim_seconds)
    dm = discretize(model, model.dt if model.dt else data.dt)
    pred = simulate(dm, data, float(data.i[0]))
    return FitReport.from_series(data.i, pred.i, SPLINE_METHOD, model.order, model.spec.K, 0.0, label), pred


def fit_arx(cfg: PipelineConfig, trace: Trace, spec: PartitionSpec | None = None, n: int | None = None) -> tuple[ARXModel, float]:
    data = trace.trim(cfg.trim_seconds)
    spec = partition_spec(cfg, data) if spec is None else spec
    t0 = time.perf_counter()
    model = fit_arx_trace(data, spec, cfg.arx.n if n is None else n, cfg.arx.m, cfg.parallel)
    return model, time.perf_counter() - t0


def validate_arx(model: ARXModel, trace: Trace, trim_seconds: float, runtime: float = 0.0) -> tuple[FitReport, FitReport, Trace]:
    """Free-run and one-step-ahead reports for the ARX baseline."""
    data = trace.trim(trim_seconds)
    start = max(model.n, model.m)
    pred = simulate_arx(model, data, data.i[:start])
    free = FitReport.from_series(data.i, pred.i, BASELINE_METHOD, model.n, model.spec.K, runtime, "validation free-run")
    one = FitReport.from_series(data.i, one_step_arx(model, data), BASELINE_METHOD, model.n, model.spec.K, runtime, "validation one-step")
    return free, one, pred


def benchmark(cfg: PipelineConfig, trace: Trace, orders=None, repeats: int | None = None) -> list[dict]:
    """Median fit time per order for both methods on identical data.

    Every spline fit uses the same spline degree (enough for the highest
    requested order) so only derivative and regression work varies.
    """
    orders = list(cfg.benchmark.orders if orders is None else orders)
    repeats = cfg.benchmark.repeats if repeats is None else repeats
    if not orders:
        return []
    data = trace.trim(cfg.trim_seconds)
    spec = partition_spec(cfg, data)
    smoothing = replace(cfg.smoothing, degree=max(cfg.smoothing.degree, max(orders) + 1))

    def spline(order):
        extract_model(data, smoothing, spec, order, spec.K, cfg.parallel)

    def arx(order):
        fit_arx_trace(data, spec, order, cfg.arx.m, cfg.parallel)

    rows = benchmark_orders(spline, orders, SPLINE_METHOD, repeats) + benchmark_orders(arx, orders, BASELINE_METHOD, repeats)
    return [
        {"method": r.method, "order": r.order, "median_seconds": r.median_seconds, "runs": r.runs, "repeats": repeats}
        for r in rows
    ]


def _finite(obj):
    """JSON-safe copy: non-finite floats become null."""
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, np.generic):
        return _finite(obj.item())
    return obj


def model_document(result: FitResult, cfg: PipelineConfig) -> dict:
    """Everything needed to reuse the model; no timings or output paths, so
    repeated runs produce identical files."""
    doc = {
        "format": MODEL_FORMAT,
        "model": result.model.to_dict(),
        "discrete": None if result.discrete is None else result.discrete.to_dict(),
        "static_curve": None if result.static_curve is None else result.static_curve.to_dict(),
        "training": {
            "gof_percent": result.report.gof_percent,
            "static_curve_gof_percent": result.static_gof,
            "n_samples": result.report.n_samples,
            "trim_seconds": cfg.trim_seconds,
        },
        "config": {k: v for k, v in cfg.to_dict().items() if k != "output_dir"},
    }
    return _finite(doc)


def dumps(doc: dict) -> str:
    return json.dumps(_finite(doc), indent=1, sort_keys=True) + "\n"


def write_model(result: FitResult, cfg: PipelineConfig, path) -> Path:
    path = Path(path)
    path.write_text(dumps(model_document(result, cfg)))
    return path


def read_model(path) -> tuple[PartitionedODEModel, dict]:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != MODEL_FORMAT:
        raise ConfigError(f"{path}: not a {MODEL_FORMAT} file")
    return PartitionedODEModel.from_dict(doc["model"]), doc
