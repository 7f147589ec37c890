"""Pipeline configuration: nested dataclasses with a JSON form."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, is_dataclass, replace
from pathlib import Path

from .errors import ConfigError
from .ode_extraction import MAX_ORDER, TimeSmoothing
from .plant import PlantConfig, VoltVarCurve
from .signals import ChirpConfig, StepConfig


@dataclass(frozen=True)
class PlantSettings:
    curve: VoltVarCurve = field(default_factory=VoltVarCurve)
    tau: float = 0.05
    noise_sigma: float = 0.005
    n_houses: int = 36
    feeder_tau: float = 0.02

    def plant(self, seed: int) -> PlantConfig:
        return PlantConfig(self.curve, self.tau, self.noise_sigma, self.n_houses, seed, self.feeder_tau)


@dataclass(frozen=True)
class VoltageFit:
    """Static current-vs-voltage diagnostic curve."""

    grid_size: int = 17
    degree: int = 3
    penalty_order: int = 2
    lambda_grid: tuple[float, ...] = tuple(float(10.0**e) for e in range(-8, 3))


@dataclass(frozen=True)
class Partitions:
    K: int = 20
    # None: span the observed voltage range of the training trace
    lo: float | None = None
    hi: float | None = None


@dataclass(frozen=True)
class ARXSettings:
    n: int = 1
    m: int = 1


@dataclass(frozen=True)
class BenchmarkSettings:
    orders: tuple[int, ...] = (1, 2, 3, 4)
    repeats: int = 5


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    dt: float = 1e-3
    trim_seconds: float = 1.2
    order: int = 1
    parallel: bool = False
    output_dir: str = "out"
    chirp: ChirpConfig = field(default_factory=ChirpConfig)
    step: StepConfig = field(default_factory=StepConfig)
    plant: PlantSettings = field(default_factory=PlantSettings)
    smoothing: TimeSmoothing = field(default_factory=TimeSmoothing)
    voltage_fit: VoltageFit = field(default_factory=VoltageFit)
    partitions: Partitions = field(default_factory=Partitions)
    arx: ARXSettings = field(default_factory=ARXSettings)
    benchmark: BenchmarkSettings = field(default_factory=BenchmarkSettings)

    def __post_init__(self):
        # the generators always follow the pipeline sample step
        object.__setattr__(self, "chirp", replace(self.chirp, sample_dt=self.dt))
        object.__setattr__(self, "step", replace(self.step, sample_dt=self.dt))

    def validate(self) -> "PipelineConfig":
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.trim_seconds < 0:
            raise ConfigError("trim_seconds must be non-negative")
        if not 1 <= self.order <= MAX_ORDER:
            raise ConfigError(f"order must be in 1..{MAX_ORDER}")
        if self.smoothing.degree < self.order + 1:
            raise ConfigError(
                f"spline degree {self.smoothing.degree} too low for order-{self.order} derivatives; "
                f"need degree >= {self.order + 1}"
            )
        if self.partitions.K < 1:
            raise ConfigError("partition count K must be positive")
        if (self.partitions.lo is None) != (self.partitions.hi is None):
            raise ConfigError("set both partitions.lo and partitions.hi, or neither")
        self.chirp.validate()
        self.step.validate()
        self.plant.plant(self.seed).validate()
        return self

    def to_dict(self) -> dict:
        d = _to_plain(self)
        d["chirp"].pop("sample_dt")
        d["step"].pop("sample_dt")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        return _from_plain(cls, d)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _to_plain(obj):
    if is_dataclass(obj):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    return obj


def _from_plain(cls, d):
    if not isinstance(d, dict):
        raise ConfigError(f"expected a mapping for {cls.__name__}, got {type(d).__name__}")
    known = {f.name: f for f in fields(cls)}
    unknown = set(d) - set(known)
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} key(s): {', '.join(sorted(unknown))}")
    kwargs = {}
    defaults = cls()
    for name, value in d.items():
        current = getattr(defaults, name)
        if is_dataclass(current):
            kwargs[name] = _from_plain(type(current), value)
        elif isinstance(current, tuple):
            kwargs[name] = tuple(value)
        elif isinstance(current, float) and isinstance(value, int) and not isinstance(value, bool):
            kwargs[name] = float(value)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> PipelineConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return PipelineConfig.from_dict(data)


def apply_override(cfg: PipelineConfig, key: str, value) -> PipelineConfig:
    """Return ``cfg`` with dotted ``key`` (e.g. ``plant.tau``) set to ``value``."""
    d = cfg.to_dict()
    node = d
    parts = key.split(".")
    for p in parts[:-1]:
        if not isinstance(node.get(p), dict):
            raise ConfigError(f"unknown config key {key!r}")
        node = node[p]
    if parts[-1] not in node:
        raise ConfigError(f"unknown config key {key!r}")
    node[parts[-1]] = value
    return PipelineConfig.from_dict(d)


def parse_override(text: str) -> tuple[str, object]:
    """``key=value`` with the value read as JSON when possible."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value

