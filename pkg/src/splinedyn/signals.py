"""Excitation voltage profiles: logarithmic square chirp and square steps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .trace import Trace


@dataclass(frozen=True)
class ChirpConfig:
    amplitude_lo: float = 0.8884
    amplitude_hi: float = 1.0884
    f0: float = 1.0
    f1: float = 5.0
    sweep_time: float = 5.0
    total_duration: float = 100.0
    phase0: float = 0.0
    sample_dt: float = 1e-3
    sweep_growth: float = 0.01

    def validate(self) -> None:
        if not 0 < self.f0 <= self.f1:
            raise ConfigError(f"chirp needs 0 < f0 <= f1, got f0={self.f0}, f1={self.f1}")
        if self.sweep_time <= 0 or self.total_duration <= 0 or self.sample_dt <= 0:
            raise ConfigError("sweep_time, total_duration and sample_dt must be positive")
        if not self.amplitude_lo < self.amplitude_hi:
            raise ConfigError("amplitude_lo must be below amplitude_hi")
        if self.sweep_growth <= -1:
            raise ConfigError("sweep_growth must exceed -1")


@dataclass(frozen=True)
class StepConfig:
    levels: tuple[float, ...] = (0.90, 0.99)
    dwell: float = 5.0
    total_duration: float = 50.0
    sample_dt: float = 1e-3

    def validate(self) -> None:
        if not self.levels:
            raise ConfigError("step needs at least one level")
        if any(not 0.85 <= v <= 1.15 for v in self.levels):
            raise ConfigError(f"step levels must lie in [0.85, 1.15] p.u., got {self.levels}")
        if self.dwell <= 0 or self.total_duration <= 0 or self.sample_dt <= 0:
            raise ConfigError("dwell, total_duration and sample_dt must be positive")


def _n_samples(duration: float, dt: float) -> int:
    return int(round(duration / dt))


def sweep_phase(tau, f0, ratio: float, T: float, phase0: float = 0.0):
    """Phase of an exponential sweep ``f(tau) = f0 ratio^(tau/T)``, ``ratio = f1/f0``."""
    tau = np.asarray(tau, dtype=float)
    if ratio == 1:
        return 2 * np.pi * f0 * tau + phase0
    r = ratio
    return 2 * np.pi * f0 * T / np.log(r) * (r ** (tau / T) - 1.0) + phase0


def instantaneous_frequency(cfg: ChirpConfig, t):
    t = np.asarray(t, dtype=float)
    k = np.floor(t / cfg.sweep_time + 1e-12)
    scale = (1.0 + cfg.sweep_growth) ** k
    tau = t - k * cfg.sweep_time
    return cfg.f0 * scale * (cfg.f1 / cfg.f0) ** (tau / cfg.sweep_time)


def gen_log_square_chirp(cfg: ChirpConfig = ChirpConfig()) -> Trace:
    """Hard-limited exponential sweep between the two amplitude levels.

    Each sweep window restarts the phase; window ``k`` scales both f0 and
    f1 by ``(1 + sweep_growth) ** k``.
    """
    cfg.validate()
    n = _n_samples(cfg.total_duration, cfg.sample_dt)
    t = np.arange(n) * cfg.sample_dt
    k = np.floor(t / cfg.sweep_time + 1e-12)
    tau = t - k * cfg.sweep_time
    scale = (1.0 + cfg.sweep_growth) ** k
    phase = sweep_phase(tau, cfg.f0 * scale, cfg.f1 / cfg.f0, cfg.sweep_time, cfg.phase0)
    v = np.where(np.cos(phase) >= 0, cfg.amplitude_hi, cfg.amplitude_lo)
    return Trace(t, v, None, {"source": "log_square_chirp"})


def gen_square_step(cfg: StepConfig = StepConfig()) -> Trace:
    """Piecewise-constant voltage cycling through ``levels`` every ``dwell`` seconds."""
    cfg.validate()
    n = _n_samples(cfg.total_duration, cfg.sample_dt)
    per = max(1, int(round(cfg.dwell / cfg.sample_dt)))
    idx = (np.arange(n) // per) % len(cfg.levels)
    v = np.asarray(cfg.levels, dtype=float)[idx]
    t = np.arange(n) * cfg.sample_dt
    return Trace(t, v, None, {"source": "square_step"})
