from dataclasses import replace

import numpy as np
import pytest

from splinedyn import pipeline
from splinedyn.bspline import make_uniform_basis
from splinedyn.config import PipelineConfig, PlantSettings
from splinedyn.errors import ConfigError
from splinedyn.ode_extraction import (
    PartitionedODEModel,
    PartitionSpec,
    TimeSmoothing,
    assign_partitions,
    coefficient_names,
    compute_derivatives,
    extract_model,
    fit_partition_ode,
    fit_partitions,
)
from splinedyn.plant import VoltVarCurve, voltvar_target
from splinedyn.signals import gen_log_square_chirp
from splinedyn.smoothing import fit_least_squares
from splinedyn.trace import Trace

ALIGNED = PartitionSpec.uniform(0.89, 1.09, 20)


@pytest.fixture(scope="module")
def noiseless():
    """Trimmed noiseless chirp response of the default surrogate."""
    cfg = PipelineConfig(plant=PlantSettings(noise_sigma=0.0))
    train, _ = pipeline.generate(cfg)
    return cfg, train.trim(cfg.trim_seconds)


def exact_derivative(cfg, data):
    p = cfg.plant
    return (p.n_houses * voltvar_target(p.curve, data.v) - data.i) / p.tau


class TestPartitions:
    def test_examples(self):
        spec = PartitionSpec.uniform(0.88, 1.08, 20)
        assert assign_partitions(spec, 0.905) == 2
        assert assign_partitions(spec, 1.08) == 19
        assert assign_partitions(spec, 0.8884) == 0

    def test_half_open(self):
        spec = PartitionSpec.uniform(0.0, 1.0, 4)
        np.testing.assert_array_equal(assign_partitions(spec, [0.25, 0.2499, 0.5, 1.0]), [1, 0, 2, 3])

    def test_clamped_outside(self):
        spec = PartitionSpec.uniform(0.0, 1.0, 4)
        np.testing.assert_array_equal(assign_partitions(spec, [-1.0, 2.0]), [0, 3])

    def test_from_data(self):
        spec = PartitionSpec.from_data([0.9, 1.0, 0.95], 5)
        assert spec.K == 5
        assert spec.edges[0] == 0.9 and spec.edges[-1] == 1.0

    def test_rejects_unsorted(self):
        with pytest.raises(ConfigError):
            PartitionSpec(np.array([0.0, 0.5, 0.4]))


class TestFitPartitionODE:
    def test_exact_first_order(self, rng):
        V = rng.uniform(0.9, 1.1, 100)
        D = rng.normal(size=100)
        I = 2 * V + 0.5 * D + 1
        fit = fit_partition_ode(I, V, D[:, None], 1)
        np.testing.assert_allclose(fit.coefficients, [2, 0.5, 1], atol=1e-8)
        assert fit.sse <= 1e-20

    def test_order_four_has_six_coefficients(self, rng):
        V = rng.uniform(0.9, 1.1, 100)
        D = rng.normal(size=(100, 4))
        truth = np.array([1.5, -0.05, 0.01, -2e-4, 3e-6, 0.2])
        I = np.column_stack([V, D, np.ones(100)]) @ truth
        fit = fit_partition_ode(I, V, D, 4)
        assert coefficient_names(4) == ["A", "B", "C", "D", "E", "F"]
        np.testing.assert_allclose(fit.coefficients, truth, rtol=1e-8, atol=1e-12)

    def test_constant_voltage_drops_column(self, rng):
        D = rng.normal(size=50)
        I = -0.05 * D + 3.0
        fit = fit_partition_ode(I, np.full(50, 0.95), D[:, None], 1)
        assert fit.voltage_dropped
        assert fit.A == 0.0
        assert fit.B == pytest.approx(-0.05)
        assert fit.offset == pytest.approx(3.0)

    def test_too_few_samples(self):
        with pytest.raises(ConfigError):
            fit_partition_ode([1.0, 2.0], [1.0, 1.0], np.zeros((2, 1)), 1)

    def test_surrogate_partition_with_exact_derivative(self, noiseless):
        cfg, data = noiseless
        p = cfg.plant
        d = exact_derivative(cfg, data)
        idx = assign_partitions(ALIGNED, data.v)
        curve = VoltVarCurve()
        for k in [4, 6, 15]:
            m = idx == k
            fit = fit_partition_ode(data.i[m], data.v[m], d[m, None], 1)
            s, b = curve.slope_intercept(data.v[m].mean())
            assert fit.A == pytest.approx(p.n_houses * s, rel=1e-2)
            assert fit.B == pytest.approx(-p.tau, rel=1e-2)
            assert fit.offset == pytest.approx(p.n_houses * b, rel=1e-2)

    def test_deadband_partition_with_exact_derivative(self, noiseless):
        cfg, data = noiseless
        d = exact_derivative(cfg, data)
        m = assign_partitions(ALIGNED, data.v) == 10
        fit = fit_partition_ode(data.i[m], data.v[m], d[m, None], 1)
        assert abs(fit.A) <= 1e-8
        assert abs(fit.offset) <= 1e-8
        assert fit.B == pytest.approx(-cfg.plant.tau, rel=1e-8)


class TestRecovery:
    def test_manufactured_per_partition(self, rng):
        spec = PartitionSpec.uniform(0.88, 1.10, 20)
        truth = np.column_stack([rng.uniform(-500, 500, 20), -rng.uniform(0.01, 0.2, 20), rng.uniform(-500, 500, 20)])
        V = rng.uniform(0.88, 1.10, 20_000)
        D = rng.normal(0, 300, 20_000)
        k = assign_partitions(spec, V)
        I = truth[k, 0] * V + truth[k, 1] * D + truth[k, 2]
        fits = fit_partitions(I, V, D[:, None], spec, 1)
        got = np.vstack([f.coefficients for f in fits])
        np.testing.assert_allclose(got, truth, rtol=1e-8, atol=1e-8)

    def test_inheritance(self, rng):
        spec = PartitionSpec.uniform(0.0, 1.0, 4)
        V = np.concatenate([rng.uniform(0.0, 0.25, 30), rng.uniform(0.75, 1.0, 30)])
        D = rng.normal(size=60)
        I = V - 0.1 * D
        fits = fit_partitions(I, V, D[:, None], spec, 1)
        assert [f.degenerate for f in fits] == [False, True, True, False]
        assert fits[1].inherited_from == 0
        assert fits[2].inherited_from == 3

    def test_surrogate_B_from_spline(self, noiseless):
        cfg, data = noiseless
        model = extract_model(data, cfg.smoothing, ALIGNED, 1)
        curve = VoltVarCurve()
        span = np.ptp(data.i)
        for k, p in enumerate(model.partitions):
            assert not p.degenerate
            assert p.B == pytest.approx(-cfg.plant.tau, rel=0.02)
            # A and C trade off inside a narrow partition; their combination is sharp
            v = 0.5 * (ALIGNED.edges[k] + ALIGNED.edges[k + 1])
            target = cfg.plant.n_houses * voltvar_target(curve, v)
            assert abs(p.A * v + p.offset - target) <= 0.01 * span

    def test_single_partition_equals_direct_fit(self, rng):
        t = np.arange(2000) * 1e-3
        V = 1.0 + 0.05 * np.sin(2 * np.pi * t)
        tr = Trace(t, V, 3 * V + 0.2 * np.sin(5 * t))
        spec = PartitionSpec.uniform(0.9, 1.1, 1)
        sm = TimeSmoothing(lam=1e-12)
        model = extract_model(tr, sm, spec, 1)
        direct = fit_partition_ode(tr.i, tr.v, compute_derivatives(model.smoothing, t, 1), 1)
        np.testing.assert_allclose(model.partitions[0].coefficients, direct.coefficients, rtol=1e-12)

    def test_nested_orders(self, default_cfg, experiment):
        train = experiment[0].trim(default_cfg.trim_seconds)
        n = 20_000
        train = Trace(train.t[:n], train.v[:n], train.i[:n])
        sm = replace(default_cfg.smoothing, degree=5, lam=1e-11)
        fit = extract_model(train, sm, None, 1).smoothing
        spec = PartitionSpec.from_data(train.v, 20)
        sse = []
        for order in range(1, 5):
            model = extract_model(train, sm, spec, order, fit=fit)
            sse.append(sum(p.sse for p in model.partitions))
        assert all(b <= a * (1 + 1e-9) for a, b in zip(sse, sse[1:])), sse


class TestDerivatives:
    def test_square(self):
        t = np.linspace(0, 5, 200)
        fit = fit_least_squares(make_uniform_basis(0, 5, 10, 3), t, t**2)
        d = compute_derivatives(fit, [3.0], 2)
        np.testing.assert_allclose(d[0], [6.0, 2.0], atol=1e-6)

    def test_constant(self):
        t = np.linspace(0, 5, 200)
        fit = fit_least_squares(make_uniform_basis(0, 5, 10, 4), t, np.full_like(t, 7.0))
        assert np.max(np.abs(compute_derivatives(fit, t, 4))) <= 1e-9

    def test_order_above_degree(self):
        t = np.linspace(0, 5, 200)
        fit = fit_least_squares(make_uniform_basis(0, 5, 10, 3), t, t)
        with pytest.raises(ConfigError, match="order at least 5"):
            compute_derivatives(fit, t, 4)

    def test_surrogate_derivative_matches_plant(self, default_cfg, default_fit):
        """Spline dI/dt against the plant ODE evaluated on noise-free current."""
        cfg = replace(default_cfg, plant=replace(default_cfg.plant, noise_sigma=0.0))
        clean = pipeline.generate(cfg)[0].trim(cfg.trim_seconds)
        result, _ = default_fit
        d = compute_derivatives(result.model.smoothing, clean.t, 1)[:, 0]
        oracle = exact_derivative(cfg, clean)
        # drop 10 ms after every switch of the applied chirp
        chirp = gen_log_square_chirp(cfg.chirp)
        switches = chirp.t[1:][np.diff(chirp.v) != 0]
        near = np.zeros(len(clean), dtype=bool)
        pos = np.searchsorted(clean.t, switches)
        for k in pos:
            near[max(k - 2, 0) : k + 10] = True
        err = d[~near] - oracle[~near]
        assert np.sqrt(np.mean(err**2)) <= 0.05 * np.sqrt(np.mean(oracle[~near] ** 2))


class TestModel:
    def test_round_trip(self, default_fit):
        result, _ = default_fit
        m = result.model
        again = PartitionedODEModel.from_dict(m.to_dict())
        np.testing.assert_array_equal(again.coefficient_matrix(), m.coefficient_matrix())
        np.testing.assert_array_equal(again.spec.edges, m.spec.edges)

    def test_default_model_shape(self, default_fit):
        result, _ = default_fit
        assert result.model.spec.K == 20
        assert result.model.order == 1
        assert all(p.stable for p in result.model.partitions)

    def test_in_sample_gof(self, default_fit):
        assert default_fit[0].report.gof_percent >= 97.0
