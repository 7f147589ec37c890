"""Command-line entry point: ``splinedyn <command> ...``.

Exit codes: 0 success, 1 GoF below ``--assert-gof``, 2 configuration or I/O error.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import pipeline
from .bspline import eval_basis, make_uniform_basis
from .config import PipelineConfig, apply_override, load_config, parse_override
from .errors import SplineDynError
from .metrics import compare_report, rows_to_csv, rows_to_text
from .ode_extraction import compute_derivatives
from .trace import read_trace, write_trace

log = logging.getLogger("splinedyn")

EXIT_OK, EXIT_GOF, EXIT_ERROR = 0, 1, 2


def _config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    flags = {
        "seed": "seed",
        "order": "order",
        "partitions": "partitions.K",
        "trim": "trim_seconds",
        "out": "output_dir",
        "dt": "dt",
    }
    for attr, key in flags.items():
        value = getattr(args, attr, None)
        if value is not None:
            cfg = apply_override(cfg, key, value)
    if getattr(args, "parallel", False):
        cfg = apply_override(cfg, "parallel", True)
    for text in args.set or []:
        cfg = apply_override(cfg, *parse_override(text))
    return cfg.validate()


def _outdir(cfg: PipelineConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, obj) -> None:
    path.write_text(pipeline.dumps(obj))


def cmd_generate(args) -> int:
    cfg = _config(args)
    out = _outdir(cfg)
    train, valid = pipeline.generate(cfg)
    if cfg.trim_seconds == 0:
        log.warning("trim is 0: traces keep the start-up transient")
    write_trace(train, out / "train.csv")
    write_trace(valid, out / "validate.csv")
    (out / "config.json").write_text(cfg.dumps())
    print(f"wrote {out / 'train.csv'} ({train.duration + train.dt:g} s) and {out / 'validate.csv'} ({valid.duration + valid.dt:g} s)")
    return EXIT_OK


def cmd_fit(args) -> int:
    cfg = _config(args)
    out = _outdir(cfg)
    result = pipeline.fit(cfg, read_trace(args.trace))
    pipeline.write_model(result, cfg, out / "model.json")
    _write_json(out / "fit_report.json", result.report.to_dict())
    pred = result.trace.with_current(result.model.predict(result.trace.v, _derivs(result)), predicted_by="regression")
    write_trace(pred, out / "fit_prediction.csv")
    r = result.report
    print(f"order {r.order}, {r.n_partitions} partitions: in-sample GoF {r.gof_percent:.2f}% ({r.runtime_seconds:.2f} s)")
    if result.static_gof is not None:
        print(f"static current-voltage curve GoF {result.static_gof:.2f}%")
    return _check_gof(args, r.gof_percent)


def _derivs(result):
    return compute_derivatives(result.model.smoothing, result.trace.t, result.model.order)


def _check_gof(args, value: float) -> int:
    if args.assert_gof is not None and value < args.assert_gof:
        print(f"GoF {value:.2f}% below required {args.assert_gof:.2f}%", file=sys.stderr)
        return EXIT_GOF
    return EXIT_OK


def cmd_validate(args) -> int:
    model, doc = pipeline.read_model(args.model)
    trim = doc["training"]["trim_seconds"] if args.trim is None else args.trim
    out = Path(args.out or Path(args.model).parent)
    out.mkdir(parents=True, exist_ok=True)
    report, pred = pipeline.validate(model, read_trace(args.trace), trim)
    _write_json(out / "validation_report.json", report.to_dict())
    write_trace(pred, out / "validation_prediction.csv")
    print(f"validation GoF {report.gof_percent:.2f}% (NRMSE {report.nrmse:.4g}, {report.n_samples} samples)")
    return _check_gof(args, report.gof_percent)


def cmd_benchmark(args) -> int:
    cfg = _config(args)
    out = _outdir(cfg)
    orders = [int(o) for o in args.orders.split(",")] if args.orders else None
    train = read_trace(args.trace)
    rows = pipeline.benchmark(cfg, train, orders, args.repeats)
    cols = ["method", "order", "repeats", "median_seconds"]
    (out / "benchmark.csv").write_text(rows_to_csv(rows, cols))
    text = rows_to_text(rows, cols, footer=False)
    spline = {r["order"]: r["median_seconds"] for r in rows if r["method"] == "spline-ode"}
    if 1 in spline and max(spline) > 1:
        text += f"spline runtime ratio order {max(spline)}/1: {spline[max(spline)] / spline[1]:.3f}\n"
    (out / "benchmark.txt").write_text(text)
    print(text, end="")
    if args.validation:
        reports = _head_to_head(cfg, train, read_trace(args.validation))
        rows = compare_report(reports)
        (out / "comparison.csv").write_text(rows_to_csv(rows))
        (out / "comparison.txt").write_text(rows_to_text(rows))
        print(rows_to_text(rows), end="")
    return EXIT_OK


def _head_to_head(cfg, train, valid):
    result = pipeline.fit(cfg, train, static_curve=False)
    spline, _ = pipeline.validate(result.model, valid, cfg.trim_seconds)
    spline.runtime_seconds = result.report.runtime_seconds
    arx, runtime = pipeline.fit_arx(cfg, train, result.model.spec)
    free, one, _ = pipeline.validate_arx(arx, valid, cfg.trim_seconds, runtime)
    return [spline, free, one]


def _open_out(path):
    if path is None:
        return contextlib.nullcontext(sys.stdout)
    return open(path, "w", newline="")


def cmd_plotdata(args) -> int:
    with _open_out(args.out) as fh:
        _plotdata(args.files, csv.writer(fh, lineterminator="\n"))
    return EXIT_OK


def _plotdata(files, writer) -> None:
    writer.writerow(["series", "x", "y"])
    for name in files:
        path = Path(name)
        with path.open() as fh:
            header = fh.readline().strip()
        if header in ("t,v", "t,v,i"):
            tr = read_trace(path)
            y = tr.v if tr.i is None else tr.i
            for x, v in zip(tr.t, y):
                writer.writerow([path.stem, f"{x:.9g}", f"{v:.9g}"])
        elif header == "series,x,y":
            with path.open() as fh:
                rows = csv.reader(fh)
                next(rows)
                writer.writerows(rows)
        else:
            raise SplineDynError(f"{path}: unknown file schema {header!r}")


def cmd_basis_dump(args) -> int:
    basis = make_uniform_basis(args.lo, args.hi, args.grid_size, args.degree)
    x = np.linspace(args.lo, args.hi, args.points)
    B = eval_basis(basis, x, args.derivative).values
    with _open_out(args.out) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["series", "x", "y"])
        for j in range(basis.nbasis):
            for xi, yi in zip(x, B[:, j]):
                writer.writerow([f"phi_{j}", f"{xi:.9g}", f"{yi:.9g}"])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="splinedyn", description="Spline-based dynamic model extraction for aggregate Volt-Var response.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed_required=False):
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (dotted path)")
        sp.add_argument("--seed", type=int, required=seed_required)
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--trim", type=float, help="seconds of start-up transient to drop")
        sp.add_argument("--dt", type=float)
        sp.add_argument("--order", type=int)
        sp.add_argument("--partitions", type=int, help="number of voltage partitions K")
        sp.add_argument("--parallel", action="store_true", help="fit partitions concurrently")

    g = sub.add_parser("generate", help="simulate training and validation experiments")
    common(g, seed_required=True)
    g.set_defaults(func=cmd_generate)

    f = sub.add_parser("fit", help="extract a partitioned ODE model from a training trace")
    f.add_argument("trace")
    f.add_argument("--assert-gof", type=float)
    common(f)
    f.set_defaults(func=cmd_fit)

    v = sub.add_parser("validate", help="free-run a model over a validation trace")
    v.add_argument("model")
    v.add_argument("trace")
    v.add_argument("--out")
    v.add_argument("--trim", type=float)
    v.add_argument("--assert-gof", type=float)
    v.set_defaults(func=cmd_validate)

    b = sub.add_parser("benchmark", help="fit runtime per order for both methods")
    b.add_argument("trace")
    b.add_argument("--orders", help="comma-separated, default from config")
    b.add_argument("--repeats", type=int)
    b.add_argument("--validation", help="validation trace for a head-to-head GoF table")
    common(b)
    b.set_defaults(func=cmd_benchmark)

    pd = sub.add_parser("plotdata", help="long-format series,x,y CSV for plotting")
    pd.add_argument("files", nargs="*")
    pd.add_argument("--out")
    pd.set_defaults(func=cmd_plotdata)

    bd = sub.add_parser("basis-dump", help="tabulate a uniform B-spline basis")
    bd.add_argument("--lo", type=float, default=0.88)
    bd.add_argument("--hi", type=float, default=1.10)
    bd.add_argument("--grid-size", type=int, default=17)
    bd.add_argument("--degree", type=int, default=3)
    bd.add_argument("--points", type=int, default=441)
    bd.add_argument("--derivative", type=int, default=0)
    bd.add_argument("--out")
    bd.set_defaults(func=cmd_basis_dump)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (SplineDynError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
