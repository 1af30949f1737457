"""Scenario configuration: nested dataclasses loaded from YAML.

Every field has a default, so an empty file is a valid regulation scenario.
Unknown keys are rejected so a typo cannot silently fall back to a default.
"""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml


class ConfigError(ValueError):
    """Parse or validation failure; ``field`` names the offending key path."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        where = []
        if field:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.field = field
        self.line = line


@dataclass
class PlantConfig:
    # Placeholder hexacopter values; not a published parameter set.
    inertia: Any = field(default_factory=lambda: [0.03, 0.03, 0.05])  # kg m^2
    damping: Any = 0.005  # N m s / rad


@dataclass
class GainConfig:
    """Per-axis ``kp + ki/(s+eps) + kd s/(tau_f s + 1)``; scalars apply to all axes."""

    kp: Any = 0.0
    ki: Any = 0.0
    kd: Any = 0.0
    eps: Any = 0.0
    tau_f: Any = 10.0


def _attitude_default() -> GainConfig:
    return GainConfig(kp=-27.75, ki=-1.85, kd=-5.55, eps=0.001, tau_f=10.0)


def _rate_default() -> GainConfig:
    return GainConfig(kp=4.2, ki=0.0, kd=0.42, eps=0.0, tau_f=10.0)


@dataclass
class ControllerConfig:
    type: str = "geometric"  # geometric | euler
    feedforward: bool = True
    cancellation: bool = True  # tracking cancellation in the rate loop
    inner_loop: str = "full"  # full | ideal (omega follows the attitude command exactly)
    attitude: GainConfig = field(default_factory=_attitude_default)
    rate: GainConfig = field(default_factory=_rate_default)


@dataclass
class SensorConfig:
    enabled: bool = True
    delay: float = 0.005  # s
    pade_order: int = 3
    lag_hz: float = 100.0


@dataclass
class ActuationConfig:
    enabled: bool = True
    arm: float = 0.3  # m
    k_f: float = 1.0e-5
    k_m: float = 2.0e-7
    mass: float = 2.0  # kg, sets the hover thrust
    time_constant: float = 0.01  # s
    w_min: float = 100.0  # rad/s
    w_max: float = 1000.0  # rad/s


@dataclass
class ReferenceConfig:
    maneuver: str = "hold"  # hold | double_flip
    target: Any = field(default_factory=lambda: [0.0, 0.0, 0.0])  # rotation vector held by "hold"
    natural_frequency: float = 15.0
    damping: float = 0.707


@dataclass
class SimConfig:
    dt: float = 5e-4
    duration: float = 6.0
    seed: int = 0
    initial_attitude: Any = field(default_factory=lambda: [0.0, 0.0, 0.0])  # rotation vector
    random_initial_attitude: bool = False  # Haar sample from ``seed`` instead
    initial_rate: Any = field(default_factory=lambda: [0.0, 0.0, 0.0])
    omega_limit: float = 1.0e3  # rad/s, divergence threshold
    # attitude lost: psi climbs back above this after having dropped below half of it;
    # null disables the check
    psi_limit: Any = 1.0
    log_every: int = 1


@dataclass
class OutputConfig:
    dir: str = "out"


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    plant: PlantConfig = field(default_factory=PlantConfig)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    sensor: SensorConfig = field(default_factory=SensorConfig)
    actuation: ActuationConfig = field(default_factory=ActuationConfig)
    reference: ReferenceConfig = field(default_factory=ReferenceConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def replace(self, **changes) -> "ScenarioConfig":
        """Copy with dotted-path overrides, e.g. ``replace(**{"sim.dt": 1e-3})``."""
        data = to_dict(self)
        for key, value in changes.items():
            node = data
            *head, last = key.split(".")
            for k in head:
                node = node[k]
            node[last] = value
        return from_dict(data)


# --- building and validation -------------------------------------------------


class _Loader(yaml.SafeLoader):
    pass


def _construct_mapping(loader, node, deep=False):
    mapping = yaml.SafeLoader.construct_mapping(loader, node, deep=deep)
    lines = {}
    for key_node, _ in node.value:
        lines[key_node.value] = key_node.start_mark.line + 1
    return _Mapping(mapping, lines)


class _Mapping(dict):
    def __init__(self, data, lines):
        super().__init__(data)
        self.lines = lines


# YAML 1.1 only reads "1.0e-3" as a float; also accept "1e-3".
_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(
        r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
        |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
        |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
        |[-+]?\.(?:inf|Inf|INF)
        |\.(?:nan|NaN|NAN))$""",
        re.X,
    ),
    list("-+0123456789."),
)
_Loader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)


def _build(cls, data, path: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError("expected a mapping", path or "<root>")
    lines = getattr(data, "lines", {})
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        name = f"{path}.{key}" if path else str(key)
        if key not in fields:
            raise ConfigError("unknown key", name, lines.get(key))
        ftype = fields[key].type
        sub = _SECTIONS.get(ftype)
        kwargs[key] = _build(sub, value, name) if sub else value
    try:
        return cls(**kwargs)
    except TypeError as exc:  # pragma: no cover - defensive
        raise ConfigError(str(exc), path)


_SECTIONS = {
    "PlantConfig": PlantConfig,
    "GainConfig": GainConfig,
    "ControllerConfig": ControllerConfig,
    "SensorConfig": SensorConfig,
    "ActuationConfig": ActuationConfig,
    "ReferenceConfig": ReferenceConfig,
    "SimConfig": SimConfig,
    "OutputConfig": OutputConfig,
}


def _vec3(value, name: str, length: int = 3) -> np.ndarray:
    arr = np.asarray(value, dtype=float) if not isinstance(value, str) else None
    if arr is None or arr.shape != (length,) or not np.all(np.isfinite(arr)):
        raise ConfigError(f"expected {length} finite numbers", name)
    return arr


def _axis_values(value, name: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError("expected a number or three numbers", name) from None
    if arr.ndim == 0:
        arr = np.full(3, float(arr))
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise ConfigError("expected a number or three numbers", name)
    return arr


def _positive(value, name: str):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
        raise ConfigError("must be a positive number", name)


def _boolean(value, name: str):
    if not isinstance(value, bool):
        raise ConfigError("must be true or false", name)


def validate(cfg: ScenarioConfig) -> ScenarioConfig:
    """Check ranges and dimensions; raises ``ConfigError`` naming the field."""
    s = cfg.sim
    _positive(s.dt, "dt")
    _positive(s.duration, "duration")
    _positive(s.omega_limit, "omega_limit")
    if s.psi_limit is not None:
        _positive(s.psi_limit, "psi_limit")
    if s.dt > s.duration:
        raise ConfigError("dt exceeds duration", "dt")
    if not isinstance(s.seed, int) or isinstance(s.seed, bool):
        raise ConfigError("must be an integer", "seed")
    if not isinstance(s.log_every, int) or s.log_every < 1:
        raise ConfigError("must be a positive integer", "log_every")
    _boolean(s.random_initial_attitude, "random_initial_attitude")
    _vec3(s.initial_attitude, "initial_attitude")
    _vec3(s.initial_rate, "initial_rate")

    J = np.asarray(cfg.plant.inertia, dtype=float)
    if J.shape == (3,):
        J = np.diag(J)
    if J.shape != (3, 3) or not np.allclose(J, J.T) or np.linalg.eigvalsh(J)[0] <= 0:
        raise ConfigError("must be 3 positive numbers or a symmetric positive definite 3x3", "inertia")
    k = np.asarray(cfg.plant.damping, dtype=float)
    if k.shape not in ((), (3,), (3, 3)) or not np.all(np.isfinite(k)):
        raise ConfigError("must be a scalar, 3-vector or 3x3 matrix", "damping")

    c = cfg.controller
    if c.type not in ("geometric", "euler"):
        raise ConfigError("must be 'geometric' or 'euler'", "type")
    if c.inner_loop not in ("full", "ideal"):
        raise ConfigError("must be 'full' or 'ideal'", "inner_loop")
    _boolean(c.feedforward, "feedforward")
    _boolean(c.cancellation, "cancellation")
    for loop in ("attitude", "rate"):
        g = getattr(c, loop)
        for name in ("kp", "ki", "kd", "eps", "tau_f"):
            _axis_values(getattr(g, name), f"{loop}.{name}")
        if np.any(_axis_values(g.tau_f, "tau_f") <= 0):
            raise ConfigError("must be positive", f"{loop}.tau_f")
        if np.any(_axis_values(g.eps, "eps") < 0):
            raise ConfigError("must be non-negative", f"{loop}.eps")

    se = cfg.sensor
    _boolean(se.enabled, "sensor.enabled")
    if not isinstance(se.delay, (int, float)) or se.delay < 0:
        raise ConfigError("must be non-negative", "delay")
    if not isinstance(se.pade_order, int) or not 1 <= se.pade_order <= 8:
        raise ConfigError("must be an integer in [1, 8]", "pade_order")
    _positive(se.lag_hz, "lag_hz")

    a = cfg.actuation
    _boolean(a.enabled, "actuation.enabled")
    for name in ("arm", "k_f", "k_m", "mass", "time_constant", "w_max"):
        _positive(getattr(a, name), name)
    if not isinstance(a.w_min, (int, float)) or not 0 <= a.w_min < a.w_max:
        raise ConfigError("must satisfy 0 <= w_min < w_max", "w_min")

    r = cfg.reference
    if r.maneuver not in ("hold", "double_flip"):
        raise ConfigError("must be 'hold' or 'double_flip'", "maneuver")
    _vec3(r.target, "target")
    _positive(r.natural_frequency, "natural_frequency")
    _positive(r.damping, "damping")
    return cfg


def from_dict(data: dict | None) -> ScenarioConfig:
    return validate(_build(ScenarioConfig, data, ""))


def to_dict(cfg) -> dict:
    return dataclasses.asdict(cfg)


def load_scenario(path) -> ScenarioConfig:
    path = Path(path)
    text = path.read_text()
    try:
        data = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"cannot parse {path.name}: {getattr(exc, 'problem', exc)}", line=line) from None
    cfg = from_dict(data)
    if cfg.name == "scenario":
        cfg.name = path.stem
    return cfg
