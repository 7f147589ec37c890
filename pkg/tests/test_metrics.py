import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from splinedyn.errors import ConfigError
from splinedyn.metrics import (
    BASELINE_METHOD,
    SPLINE_METHOD,
    FitReport,
    compare_report,
    gof,
    nrmse,
    rmse,
    rows_to_csv,
    rows_to_text,
    speedup,
)


def report(method, runtime, order=1, label="validation"):
    return FitReport(method, order, 20, 99.0, 0.01, 0.1, 100, runtime, label)


class TestScalar:
    def test_unit_case(self):
        assert rmse([0, 2], [1, 1]) == 1.0
        assert nrmse([0, 2], [1, 1]) == 0.5
        assert gof([0, 2], [1, 1]) == 50.0

    def test_perfect(self):
        y = [0.1, 0.5, -2.0]
        assert nrmse(y, y) == 0.0
        assert gof(y, y) == 100.0

    def test_constant_measured(self):
        with pytest.raises(ConfigError):
            nrmse([1.0, 1.0], [1.0, 2.0])

    def test_length_mismatch(self):
        with pytest.raises(ConfigError):
            gof([1.0, 2.0], [1.0])

    @settings(max_examples=60, deadline=None)
    @given(
        y=arrays(float, 20, elements=st.floats(-100, 100)),
        e=arrays(float, 20, elements=st.floats(-1, 1)),
        a=st.floats(0.1, 10),
        b=st.floats(-50, 50),
    )
    def test_invariances(self, y, e, a, b):
        if np.ptp(y) < 1e-3:
            return
        yh = y + e
        g = gof(y, yh)
        assert g <= 100.0
        assert nrmse(y, yh) >= 0
        # affine changes of units leave GoF unchanged
        assert gof(a * y + b, a * yh + b) == pytest.approx(g, rel=1e-9, abs=1e-9)
        assert g == pytest.approx((1 - nrmse(y, yh)) * 100, abs=1e-12)


class TestReports:
    def test_speedup(self):
        assert round(speedup(254.70, 52.16), 2) == 4.88

    def test_single_report(self):
        rows = compare_report([report(SPLINE_METHOD, 1.0)])
        assert len(rows) == 1
        assert rows[0]["speedup"] == ""

    def test_two_reports(self):
        rows = compare_report([report(SPLINE_METHOD, 52.16), report(BASELINE_METHOD, 254.70)])
        spline = [r for r in rows if r["method"] == SPLINE_METHOD][0]
        assert spline["speedup"] == 4.88

    def test_equal_runtimes(self):
        rows = compare_report([report(SPLINE_METHOD, 3.0), report(BASELINE_METHOD, 3.0)])
        assert [r["speedup"] for r in rows if r["method"] == SPLINE_METHOD] == [1.0]

    def test_sorted(self):
        rows = compare_report([report(SPLINE_METHOD, 1, 2), report(BASELINE_METHOD, 1, 1), report(SPLINE_METHOD, 1, 1)])
        assert [(r["method"], r["order"]) for r in rows] == [("arx", 1), ("spline-ode", 1), ("spline-ode", 2)]

    def test_from_series(self):
        r = FitReport.from_series([0, 2], [1, 1], SPLINE_METHOD, 1, 20)
        assert r.gof_percent == 50.0 and r.nrmse == 0.5 and r.n_samples == 2
        assert "runtime_seconds" not in r.to_dict(include_runtime=False)

    def test_tables(self):
        rows = compare_report([report(SPLINE_METHOD, 52.16), report(BASELINE_METHOD, 254.70)])
        csv_text = rows_to_csv(rows)
        assert csv_text.splitlines()[0].startswith("method,label,order")
        assert len(csv_text.splitlines()) == 3
        text = rows_to_text(rows)
        assert "98.74" in text and "99.03" in text
        assert "4.88" in text
