"""Experiment configuration: YAML (or JSON) files mapped onto dataclasses.

Unknown keys are rejected with the dotted path of the offending field.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

EXPERIMENTS = (
    "verify-local",
    "verify-boundary",
    "perturb-scan",
    "partition",
    "slope-track",
    "orbit",
    "mixing",
    "homoclinic",
    "lyapunov",
)
TORUS_EXPERIMENTS = ("orbit", "mixing", "homoclinic", "lyapunov")


class InvalidConfig(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class UnknownExperiment(InvalidConfig):
    def __init__(self, name):
        super().__init__("experiment", f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")


@dataclass
class ModelConfig:
    p: int = 2
    lam: float = 2.0
    r: float = 1.0
    torus: bool = False

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if not self.lam > 1:
            raise ValueError("lambda must be > 1")
        if not self.r > 0:
            raise ValueError("r must be > 0")


@dataclass
class BumpConfig:
    center: tuple = (0.0, 0.0)
    radius: float = 0.1
    amplitude: tuple = (0.0, 0.0)

    def __post_init__(self):
        if len(self.center) != 2 or len(self.amplitude) != 2:
            raise ValueError("center and amplitude need two entries")
        if not self.radius > 0:
            raise ValueError("radius must be > 0")


@dataclass
class FamilyConfig:
    kind: str = "c2_small"
    delta: float = 1e-4
    delta1: float = 1e-3
    m2: float = 1.0
    near: str = "boundary"

    def __post_init__(self):
        if self.kind not in ("c2_small", "c1_small_c2_large"):
            raise ValueError(f"unknown family kind {self.kind!r}")
        if self.near not in ("boundary", "interior"):
            raise ValueError("near must be 'boundary' or 'interior'")
        if min(self.delta, self.delta1, self.m2) <= 0:
            raise ValueError("family sizes must be positive")


@dataclass
class GridConfig:
    n: int = 512  # verify-local grids
    n_x: int = 640  # verify-boundary entry grid
    n_y: int = 40
    depth_bits: int = 30
    support_samples: int = 33
    resolution: tuple = (256, 16)  # partition
    t_max: int = 30
    samples: int = 1000  # slope-track orbits, mixing sample cloud
    eps: float = 0.05  # orbit density cells
    seeds: int = 5  # orbit / lyapunov seeds drawn from the RNG
    pairs: int = 20  # mixing ball pairs
    radius: float = 0.05  # mixing ball radius
    length: float = 10.0  # homoclinic W^u half-length
    window: float = 1.0  # homoclinic W^s half-length
    spacing: float = 0.01
    trace_len: int = 1000  # rows of the orbit CSV

    def __post_init__(self):
        for name in ("n", "n_x", "n_y", "support_samples", "t_max", "samples", "seeds", "pairs", "trace_len"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("depth_bits", "eps", "radius", "length", "window", "spacing"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if len(self.resolution) != 2 or min(self.resolution) < 2:
            raise ValueError("resolution needs two entries >= 2")


@dataclass
class CapConfig:
    n_max: int = 10**6  # transition cap
    steps: int = 10**5  # orbit / lyapunov length
    mixing_n: int = 200
    bisect_iters: int = 200
    max_full_checks: int = 3
    period_cap: int = 4

    def __post_init__(self):
        for f in dataclasses.fields(self):
            if getattr(self, f.name) < 1:
                raise ValueError(f"{f.name} must be >= 1")


@dataclass
class ToleranceConfig:
    conjugacy: float = 1e-10
    group_law: float = 1e-9
    sigma_min: float = 1.0
    angle: float = 1e-6
    lyapunov: float = 1e-3
    min_homoclinic: int = 10
    displacement: float = 1e-3

    def __post_init__(self):
        for f in dataclasses.fields(self):
            if not getattr(self, f.name) > 0:
                raise ValueError(f"{f.name} must be > 0")


@dataclass
class ScanConfig:
    c2_deltas: tuple = (1e-4,)
    c1: tuple = ((1e-3, 1.0),)

    def __post_init__(self):
        if any(d <= 0 for d in self.c2_deltas):
            raise ValueError("c2_deltas must be positive")
        if any(len(pair) != 2 or min(pair) <= 0 for pair in self.c1):
            raise ValueError("c1 entries are positive [delta1, m2] pairs")


@dataclass
class RegionConfig:
    N: int = -2
    Y: float = 0.05

    def __post_init__(self):
        if self.N > -1:
            raise ValueError("N must be <= -1")
        if not self.Y > 0:
            raise ValueError("Y must be > 0")


@dataclass
class ExperimentConfig:
    experiment: str = "verify-local"
    model: ModelConfig = field(default_factory=ModelConfig)
    perturbation: list = field(default_factory=list)  # of BumpConfig
    family: FamilyConfig | None = None
    grids: GridConfig = field(default_factory=GridConfig)
    caps: CapConfig = field(default_factory=CapConfig)
    tolerances: ToleranceConfig = field(default_factory=ToleranceConfig)
    scan: ScanConfig = field(default_factory=ScanConfig)
    region: RegionConfig = field(default_factory=RegionConfig)
    alpha: float = 0.5
    seed: int = 0
    output: str = "out"
    workers: int = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise UnknownExperiment(self.experiment)
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("output")
        d.pop("workers")
        return _plain(d)


def _plain(v):
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


# ---------------------------------------------------------------------------
# building from raw mappings
# ---------------------------------------------------------------------------

_ALIASES = {"lambda": "lam"}
_SECTIONS = {
    "model": ModelConfig,
    "family": FamilyConfig,
    "grids": GridConfig,
    "caps": CapConfig,
    "tolerances": ToleranceConfig,
    "scan": ScanConfig,
    "region": RegionConfig,
}


def _coerce(value, default, path):
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
        raise InvalidConfig(path, f"expected a boolean, got {value!r}")
    if isinstance(default, int):
        if isinstance(value, bool):
            raise InvalidConfig(path, f"expected an integer, got {value!r}")
        if isinstance(value, float) and value.is_integer():
            return int(value)
        if isinstance(value, int):
            return value
        if isinstance(value, str):
            try:
                f = float(value)
            except ValueError:
                raise InvalidConfig(path, f"expected an integer, got {value!r}") from None
            if f.is_integer():
                return int(f)
        raise InvalidConfig(path, f"expected an integer, got {value!r}")
    if isinstance(default, float):
        if isinstance(value, bool):
            raise InvalidConfig(path, f"expected a number, got {value!r}")
        try:
            f = float(value)
        except (TypeError, ValueError):
            raise InvalidConfig(path, f"expected a number, got {value!r}") from None
        if not math.isfinite(f):
            raise InvalidConfig(path, "must be finite")
        return f
    if isinstance(default, str):
        if not isinstance(value, str):
            raise InvalidConfig(path, f"expected a string, got {value!r}")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            raise InvalidConfig(path, f"expected a list, got {value!r}")
        proto = default[0] if default else 0.0
        return tuple(_coerce(v, proto, f"{path}[{i}]") for i, v in enumerate(value))
    return value


def _build(cls, data, path):
    if not isinstance(data, dict):
        raise InvalidConfig(path, f"expected a mapping, got {type(data).__name__}")
    proto = cls()
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        name = _ALIASES.get(key, key)
        sub = f"{path}.{key}" if path else str(key)
        if name not in names:
            raise InvalidConfig(sub, "unknown field")
        kwargs[name] = _coerce(value, getattr(proto, name), sub)
    try:
        return cls(**kwargs)
    except InvalidConfig:
        raise
    except (TypeError, ValueError) as e:
        raise InvalidConfig(path, str(e)) from None


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise InvalidConfig("", "configuration must be a mapping")
    data = dict(data)
    top = {}
    # shorthand: model fields at top level
    model = data.pop("model", None) or {}
    if model == "torus":
        model = {"torus": True}
    if not isinstance(model, dict):
        raise InvalidConfig("model", "expected a mapping or 'torus'")
    model = dict(model)
    for key in ("p", "lambda", "lam", "r"):
        if key in data:
            if key in model:
                raise InvalidConfig(key, "given both at top level and under model")
            model[key] = data.pop(key)
    top["model"] = _build(ModelConfig, model, "model")
    if "experiment" in data:
        exp = data.pop("experiment")
        if not isinstance(exp, str):
            raise InvalidConfig("experiment", "expected a string")
        if exp not in EXPERIMENTS:
            raise UnknownExperiment(exp)
        top["experiment"] = exp
    pert = data.pop("perturbation", []) or []
    if not isinstance(pert, list):
        raise InvalidConfig("perturbation", "expected a list of bumps")
    top["perturbation"] = [_build(BumpConfig, b, f"perturbation[{i}]") for i, b in enumerate(pert)]
    for name, cls in _SECTIONS.items():
        if name == "model" or name not in data:
            continue
        raw = data.pop(name)
        if name == "family" and raw is None:
            top["family"] = None
            continue
        top[name] = _build(cls, raw, name)
    for key in ("alpha", "seed", "output", "workers"):
        if key in data:
            proto = getattr(ExperimentConfig(), key)
            top[key] = _coerce(data.pop(key), proto, key)
    for key in data:
        raise InvalidConfig(str(key), "unknown field")
    try:
        return ExperimentConfig(**top)
    except InvalidConfig:
        raise
    except (TypeError, ValueError) as e:
        raise InvalidConfig("", str(e)) from None


def load_raw(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise InvalidConfig("", f"cannot read {path}: {e.strerror}") from None
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (yaml.YAMLError, json.JSONDecodeError) as e:
        raise InvalidConfig("", f"cannot parse {path}: {e}") from None
    return data or {}


def load_config(path) -> ExperimentConfig:
    return config_from_dict(load_raw(path))
