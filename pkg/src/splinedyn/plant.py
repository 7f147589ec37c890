"""Surrogate aggregate-inverter plant.

A Volt-Var curve drives a first-order lag on the aggregate reactive current.
An optional feeder lag makes the voltage measured at the point of
connection a smoothed copy of the applied excitation, so the recorded
voltage passes through the intermediate levels between plateaus.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .trace import Trace

RATED_KW = 6.25


@dataclass(frozen=True)
class VoltVarCurve:
    """Piecewise-linear Volt-Var characteristic in p.u. (defaults from a 4.375 kW / 6.25 kW setting)."""

    V_L: float = 0.88
    V1: float = 0.92
    V2: float = 0.98
    V3: float = 1.02
    V4: float = 1.08
    V_H: float = 1.10
    Q1: float = 4.375 / RATED_KW
    Q2: float = 0.0
    Q3: float = 0.0
    Q4: float = -4.375 / RATED_KW

    def validate(self) -> None:
        if not self.V_L < self.V1 < self.V2 < self.V3 < self.V4 < self.V_H:
            raise ConfigError("Volt-Var breakpoints must be strictly increasing")
        if self.Q2 != 0 or self.Q3 != 0:
            raise ConfigError("Q2 and Q3 must be zero (deadband)")
        if not self.Q1 > 0 > self.Q4:
            raise ConfigError("need Q1 > 0 > Q4")

    @property
    def breakpoints(self) -> tuple[float, ...]:
        return (self.V1, self.V2, self.V3, self.V4)

    def slope_intercept(self, v: float) -> tuple[float, float]:
        """Local ``(slope, intercept)`` of the curve at ``v``."""
        if v <= self.V1 or v >= self.V4 or self.V2 <= v <= self.V3:
            return 0.0, float(voltvar_target(self, v))
        if v < self.V2:
            s = (self.Q2 - self.Q1) / (self.V2 - self.V1)
            return s, self.Q1 - s * self.V1
        s = (self.Q4 - self.Q3) / (self.V4 - self.V3)
        return s, self.Q3 - s * self.V3


def voltvar_target(curve: VoltVarCurve, v):
    """Steady-state reactive output per inverter for terminal voltage ``v``."""
    out = np.interp(v, [curve.V1, curve.V2, curve.V3, curve.V4], [curve.Q1, curve.Q2, curve.Q3, curve.Q4])
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class PlantConfig:
    curve: VoltVarCurve = field(default_factory=VoltVarCurve)
    tau: float = 0.05
    noise_sigma: float = 0.005
    n_houses: int = 36
    seed: int = 0
    # 0 disables the feeder lag: the plant sees the excitation directly
    feeder_tau: float = 0.0
    initial_current: float = 0.0

    def validate(self) -> None:
        self.curve.validate()
        if self.tau <= 0:
            raise ConfigError("tau must be positive")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be non-negative")
        if self.n_houses < 1:
            raise ConfigError("n_houses must be a positive integer")
        if self.feeder_tau < 0:
            raise ConfigError("feeder_tau must be non-negative")


def simulate_plant(cfg: PlantConfig, voltage: Trace) -> Trace:
    """Integrate the surrogate with RK4 at the trace step, then add noise.

    The applied voltage is held constant over each sample interval.  The
    returned trace carries the point-of-connection voltage (equal to the
    input when ``feeder_tau == 0``) and the noisy aggregate current.
    """
    cfg.validate()
    dt = voltage.dt
    if dt > cfg.tau / 2 or (cfg.feeder_tau > 0 and dt > cfg.feeder_tau / 2):
        warnings.warn(f"sample step {dt} s is large relative to the plant time constants", stacklevel=2)
    c = cfg.curve
    q1, q4, n_h = c.Q1, c.Q4, float(cfg.n_houses)
    s_lo = (c.Q2 - c.Q1) / (c.V2 - c.V1)
    s_hi = (c.Q4 - c.Q3) / (c.V4 - c.V3)
    v1, v2, v3, v4 = c.V1, c.V2, c.V3, c.V4

    def target(v):
        if v <= v1:
            return n_h * q1
        if v < v2:
            return n_h * (q1 + s_lo * (v - v1))
        if v <= v3:
            return 0.0
        if v < v4:
            return n_h * s_hi * (v - v3)
        return n_h * q4

    tau, ftau = cfg.tau, cfg.feeder_tau
    vs = voltage.v.tolist()
    n = len(vs)
    vp_out = [0.0] * n
    i_out = [0.0] * n
    vp, cur = vs[0], cfg.initial_current
    h = dt
    for k in range(n):
        vp_out[k] = vp
        i_out[k] = cur
        if k == n - 1:
            break
        u = vs[k]
        if ftau > 0:
            def f(p, x):
                return (u - p) / ftau, (target(p) - x) / tau

            a1, b1 = f(vp, cur)
            a2, b2 = f(vp + 0.5 * h * a1, cur + 0.5 * h * b1)
            a3, b3 = f(vp + 0.5 * h * a2, cur + 0.5 * h * b2)
            a4, b4 = f(vp + h * a3, cur + h * b3)
            vp += h / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
            cur += h / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
        else:
            q = target(u)
            b1 = (q - cur) / tau
            b2 = (q - (cur + 0.5 * h * b1)) / tau
            b3 = (q - (cur + 0.5 * h * b2)) / tau
            b4 = (q - (cur + h * b3)) / tau
            cur += h / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
            vp = vs[k + 1]
    i_arr = np.asarray(i_out)
    if cfg.noise_sigma > 0:
        rng = np.random.default_rng(cfg.seed)
        i_arr = i_arr + cfg.noise_sigma * rng.standard_normal(n)
    meta = {
        **voltage.meta,
        "plant": "volt_var_first_order_lag",
        "tau": cfg.tau,
        "feeder_tau": cfg.feeder_tau,
        "noise_sigma": cfg.noise_sigma,
        "n_houses": cfg.n_houses,
        "seed": cfg.seed,
    }
    return Trace(voltage.t, np.asarray(vp_out), i_arr, meta)
