"""Backward-Euler discretisation of first-order partitioned models.

With ``D = dt / B`` the implicit update of ``dI/dt = (I - A V - C) / B`` is::

    I[k+1] = I[k] / (1 - D) - D / (1 - D) * (A V[k+1] + C)

evaluated here in the algebraically identical fixed-point form
``I* + g (I[k] - I*)`` with ``I* = A V[k+1] + C`` and ``g = 1 / (1 - D)``,
so the fixed point and the contraction ratio hold to the last bit.
"""

from __future__ import annotations

import bisect
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NonDynamicPartitionError, TraceError
from .ode_extraction import PartitionedODEModel, PartitionSpec, assign_partitions
from .trace import Trace

DT_RTOL = 1e-9


@dataclass(frozen=True)
class DiscreteModel:
    spec: PartitionSpec
    A: np.ndarray
    C: np.ndarray
    D: np.ndarray
    dt: float

    @property
    def B(self) -> np.ndarray:
        return self.dt / self.D

    @property
    def gain(self) -> np.ndarray:
        return 1.0 / (1.0 - self.D)

    @property
    def stable(self) -> np.ndarray:
        return np.abs(self.gain) < 1.0

    def to_dict(self) -> dict:
        return {
            "dt": self.dt,
            "partition_edges": self.spec.edges.tolist(),
            "A": self.A.tolist(),
            "C": self.C.tolist(),
            "D": self.D.tolist(),
            "gain": self.gain.tolist(),
            "stable": self.stable.tolist(),
        }


def discretize(model: PartitionedODEModel, dt: float) -> DiscreteModel:
    if model.order != 1:
        raise ConfigError(f"only first-order models are discretised, got order {model.order}")
    if dt <= 0:
        raise ConfigError("dt must be positive")
    coef = model.coefficient_matrix()
    A, B, C = coef[:, 0], coef[:, 1], coef[:, 2]
    zero = np.flatnonzero(B == 0)
    if zero.size:
        raise NonDynamicPartitionError(f"partition {int(zero[0])} has B = 0 and no dynamics")
    return DiscreteModel(model.spec, A.copy(), C.copy(), dt / B, float(dt))


def step(dm: DiscreteModel, I_k: float, V_next: float) -> float:
    """One implicit-Euler update using the partition selected by ``V_next``."""
    p = int(assign_partitions(dm.spec, V_next))
    target = dm.A[p] * V_next + dm.C[p]
    return target + (I_k - target) / (1.0 - dm.D[p])


def _resample(voltage: Trace, dt: float) -> Trace:
    n = int(np.floor(voltage.duration / dt + 1e-9)) + 1
    t = voltage.t[0] + np.arange(n) * dt
    return Trace(t, np.interp(t, voltage.t, voltage.v), None, dict(voltage.meta))


def simulate(dm: DiscreteModel, voltage: Trace, I0: float, resample: bool = False) -> Trace:
    """Free-run prediction; the returned trace's current starts at ``I0``."""
    if abs(voltage.dt - dm.dt) > DT_RTOL * dm.dt:
        if not resample:
            raise TraceError(f"trace step {voltage.dt} s differs from model step {dm.dt} s")
        voltage = _resample(voltage, dm.dt)
    v = voltage.v
    idx = assign_partitions(dm.spec, v)
    target = (dm.A[idx] * v + dm.C[idx]).tolist()
    g = (1.0 / (1.0 - dm.D[idx])).tolist()
    out = [0.0] * len(v)
    cur = float(I0)
    out[0] = cur
    for k in range(1, len(v)):
        tk = target[k]
        cur = tk + g[k] * (cur - tk)
        out[k] = cur
    return Trace(voltage.t, v, np.asarray(out), {**voltage.meta, "predicted_by": "backward_euler"})


def rk4_oracle(model: PartitionedODEModel, voltage: Trace, I0: float, substeps: int = 1) -> Trace:
    """Classical RK4 on ``dI/dt = (I - A V - C) / B`` with ``substeps`` per sample.

    Voltage between samples is linearly interpolated and the partition is
    re-selected at every stage.
    """
    if substeps < 1:
        raise ConfigError("substeps must be >= 1")
    if model.order != 1:
        raise ConfigError("the RK4 oracle integrates first-order models only")
    coef = model.coefficient_matrix()
    A, B, C = coef[:, 0], coef[:, 1], coef[:, 2]
    zero = np.flatnonzero(B == 0)
    if zero.size:
        raise NonDynamicPartitionError(f"partition {int(zero[0])} has B = 0 and no dynamics")
    edges = model.spec.edges
    K = model.spec.K
    A_l, B_l, C_l = A.tolist(), B.tolist(), C.tolist()
    inner = edges[1:-1].tolist()

    def rhs(i, v):
        p = min(bisect.bisect_right(inner, v), K - 1)
        return (i - A_l[p] * v - C_l[p]) / B_l[p]

    v = voltage.v.tolist()
    h = voltage.dt / substeps
    out = [0.0] * len(v)
    cur = float(I0)
    out[0] = cur
    for k in range(len(v) - 1):
        va, vb = v[k], v[k + 1]
        for s in range(substeps):
            f0 = s / substeps
            fm = (s + 0.5) / substeps
            f1 = (s + 1) / substeps
            v0 = va + (vb - va) * f0
            vm = va + (vb - va) * fm
            v1 = va + (vb - va) * f1
            k1 = rhs(cur, v0)
            k2 = rhs(cur + 0.5 * h * k1, vm)
            k3 = rhs(cur + 0.5 * h * k2, vm)
            k4 = rhs(cur + h * k3, v1)
            cur += h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[k + 1] = cur
    if not np.all(np.isfinite(out)):
        warnings.warn("RK4 oracle produced non-finite values", stacklevel=2)
    return Trace(voltage.t, voltage.v, np.asarray(out), {**voltage.meta, "predicted_by": "rk4"})
