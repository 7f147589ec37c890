import numpy as np
import pytest

from splinedyn.errors import ConfigError
from splinedyn.plant import PlantConfig, VoltVarCurve, simulate_plant, voltvar_target
from splinedyn.signals import gen_log_square_chirp
from splinedyn.trace import Trace


def const_trace(v, seconds, dt=1e-3):
    n = int(round(seconds / dt))
    return Trace(np.arange(n) * dt, np.full(n, float(v)))


class TestCurve:
    @pytest.mark.parametrize("v, q", [(1.00, 0.0), (0.90, 0.7), (0.95, 0.35), (1.05, -0.35), (1.12, -0.7)])
    def test_target(self, v, q):
        assert voltvar_target(VoltVarCurve(), v) == pytest.approx(q, abs=1e-12)

    def test_q1_from_rating(self):
        assert VoltVarCurve().Q1 == pytest.approx(4.375 / 6.25)

    def test_slope_intercept_reproduces_target(self):
        c = VoltVarCurve()
        for v in [0.89, 0.93, 0.97, 1.0, 1.05, 1.09]:
            s, b = c.slope_intercept(v)
            assert s * v + b == pytest.approx(voltvar_target(c, v), abs=1e-12)

    def test_non_monotone_rejected(self):
        with pytest.raises(ConfigError):
            VoltVarCurve(V2=0.91).validate()


class TestSimulate:
    def test_deadband_decay(self):
        cfg = PlantConfig(noise_sigma=0.0, initial_current=10.0)
        tr = simulate_plant(cfg, const_trace(1.0, 1.0))
        k = int(round(10 * cfg.tau / tr.dt))
        assert abs(tr.i[k]) <= 1e-4 * 10.0

    def test_step_time_constant(self):
        cfg = PlantConfig(noise_sigma=0.0)
        n = 2000
        t = np.arange(n) * 1e-3
        k0 = 500
        v = np.where(np.arange(n) < k0, 1.0, 0.9)
        tr = simulate_plant(cfg, Trace(t, v))
        level = 0.632 * 0.7 * cfg.n_houses
        cross = np.flatnonzero(tr.i >= level)[0]
        assert abs(tr.t[cross] - (t[k0] + cfg.tau)) <= 1e-3 + 1e-12

    def test_steady_state(self):
        cfg = PlantConfig(noise_sigma=0.0)
        tr = simulate_plant(cfg, const_trace(0.95, 1.0))
        assert tr.i[-1] == pytest.approx(0.35 * cfg.n_houses, rel=1e-6)

    def test_chirp_bounded(self):
        cfg = PlantConfig(feeder_tau=0.02)
        tr = simulate_plant(cfg, gen_log_square_chirp())
        bound = 0.7 * cfg.n_houses + 6 * cfg.noise_sigma
        assert np.max(np.abs(tr.i)) <= bound

    def test_feeder_lag_smooths_voltage(self):
        cfg = PlantConfig(noise_sigma=0.0, feeder_tau=0.02)
        n = 500
        v = np.where(np.arange(n) < 100, 1.0, 0.9)
        tr = simulate_plant(cfg, Trace(np.arange(n) * 1e-3, v))
        assert tr.v[100] == 1.0
        k = 100 + 20
        assert tr.v[k] == pytest.approx(1.0 - 0.1 * (1 - np.exp(-1)), abs=1e-4)

    def test_deterministic(self):
        chirp = gen_log_square_chirp()
        a = simulate_plant(PlantConfig(seed=3), chirp)
        b = simulate_plant(PlantConfig(seed=3), chirp)
        c = simulate_plant(PlantConfig(seed=4), chirp)
        np.testing.assert_array_equal(a.i, b.i)
        assert not np.array_equal(a.i, c.i)

    def test_noise_level(self):
        chirp = gen_log_square_chirp()
        clean = simulate_plant(PlantConfig(noise_sigma=0.0), chirp)
        noisy = simulate_plant(PlantConfig(noise_sigma=0.005), chirp)
        assert np.std(noisy.i - clean.i) == pytest.approx(0.005, rel=0.02)

    def test_coarse_step_warns(self):
        with pytest.warns(UserWarning):
            simulate_plant(PlantConfig(noise_sigma=0.0), const_trace(1.0, 1.0, dt=0.04))

    def test_invalid(self):
        with pytest.raises(ConfigError):
            simulate_plant(PlantConfig(tau=0.0), const_trace(1.0, 0.1))
