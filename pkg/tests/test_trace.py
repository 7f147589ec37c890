import json

import numpy as np
import pytest

from splinedyn.errors import TraceError
from splinedyn.trace import Trace, meta_path, read_trace, write_trace


def make(n=100, dt=1e-3, current=True):
    t = np.arange(n) * dt
    return Trace(t, 1 + 0.01 * np.sin(t), np.cos(t) if current else None, {"source": "test"})


class TestTrace:
    def test_trim(self):
        tr = make().trim(0.0105)
        assert len(tr) == 89
        assert tr.meta["trim_applied"] == 0.0105

    def test_trim_exact_multiple(self):
        assert len(make().trim(0.012)) == 88

    def test_non_uniform_rejected(self):
        t = np.array([0.0, 0.001, 0.0025])
        with pytest.raises(TraceError):
            Trace(t, np.ones(3))

    def test_non_finite_rejected(self):
        with pytest.raises(TraceError):
            Trace(np.arange(3) * 1e-3, np.array([1.0, np.nan, 1.0]))

    def test_length_mismatch(self):
        with pytest.raises(TraceError):
            Trace(np.arange(3) * 1e-3, np.ones(3), np.ones(2))

    @pytest.mark.parametrize("current", [True, False])
    def test_csv_round_trip(self, tmp_path, current):
        tr = make(current=current)
        path = write_trace(tr, tmp_path / "x.csv")
        header = path.read_text().splitlines()[0]
        assert header == ("t,v,i" if current else "t,v")
        back = read_trace(path)
        np.testing.assert_allclose(back.v, tr.v, rtol=1e-8)
        if current:
            np.testing.assert_allclose(back.i, tr.i, rtol=1e-8, atol=1e-12)
        assert json.loads(meta_path(path).read_text())["source"] == "test"
        assert back.meta["source"] == "test"
