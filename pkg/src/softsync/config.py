"""Scenario configuration: a strict TOML schema mapped onto dataclasses.

Every table is checked against its dataclass before anything runs; unknown keys
and wrong types raise :class:`ConfigError` naming the offending key path.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, get_args, get_origin, get_type_hints

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .plant import ActuatorParams, ChannelCoeffs, GripperModel, PumpParams, channel_coeffs
from .sim import DisturbanceSpec, ScenarioSpec

PRESETS = ("fig7a", "fig7b", "fig7c", "fig8")


@dataclass
class PhysicalFinger:
    E: float
    w: float
    a: float
    b: float
    t: float
    L0: float
    A_syr: float
    lead: float
    C_i: float
    n: float = 1.0
    M_eq: float = 1.0
    C_n: float = 1.0
    c_gain: float = 1.0
    omega_max: float = 5.0


@dataclass
class GripperConfig:
    channels: list = field(default_factory=list)   # [k_gain, c_ratio, k_ratio] per finger
    physical: list = field(default_factory=list)   # PhysicalFinger tables
    bounds: list = field(default_factory=lambda: [0.143, 0.059])


@dataclass
class ControllerConfig:
    omega_c: float = 5.0
    min_order: int = 2
    inverse: str = "averaged"
    feedback: bool = False
    fb_omega_c: float | None = None
    fb_order: int | None = None


@dataclass
class NoiseConfig:
    sigma: float = 0.0
    seed: int = 0
    n_seeds: int = 50


@dataclass
class DisturbanceConfig:
    finger: int = 1
    start: float = 1.4
    duration: float = 0.0
    amplitude: float = 0.0
    kind: str = "output"
    calibrate_peak: float | None = None


@dataclass
class PerturbationConfig:
    seed: int | None = None


@dataclass
class ScenarioConfig:
    amplitude: float = math.pi / 3
    ref_start: float = 0.0
    duration: float = 5.0
    Ts: float = 0.1
    settle_band: float = 0.02
    speed_limit: float = 5.0
    compare: str = "none"
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    disturbance: DisturbanceConfig = field(default_factory=DisturbanceConfig)
    perturbation: PerturbationConfig = field(default_factory=PerturbationConfig)


@dataclass
class AnalyzeConfig:
    n_draws: int = 1000
    seed: int = 0
    omega_min: float = 0.1
    omega_max: float = 100.0
    n_omega: int = 60


@dataclass
class IdentifyConfig:
    trace: str | None = None
    gain: float = 7.831
    step_amplitude: float = 1.0


@dataclass
class Config:
    gripper: GripperConfig = field(default_factory=GripperConfig)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    analyze: AnalyzeConfig = field(default_factory=AnalyzeConfig)
    identify: IdentifyConfig = field(default_factory=IdentifyConfig)
    output_dir: str = "out"
    base_dir: Path = field(default=Path("."), repr=False)

    # -- derived objects -------------------------------------------------------------
    def gripper_model(self) -> GripperModel:
        g = self.gripper
        if bool(g.channels) == bool(g.physical):
            raise ConfigError("gripper: give exactly one of 'channels' or 'physical'")
        try:
            if g.channels:
                coeffs = []
                for i, triple in enumerate(g.channels):
                    if not isinstance(triple, list) or len(triple) != 3:
                        raise ConfigError(f"gripper.channels[{i}]: expected [k_gain, c_ratio, k_ratio]")
                    coeffs.append(ChannelCoeffs(*(float(v) for v in triple)))
            else:
                coeffs = []
                for f in g.physical:
                    act = ActuatorParams(f.E, f.w, f.a, f.b, f.t, f.L0, f.n, f.M_eq, f.C_n, f.c_gain)
                    coeffs.append(channel_coeffs(act, PumpParams(f.A_syr, f.lead, f.C_i, f.omega_max)))
            if len(g.bounds) != 2:
                raise ConfigError("gripper.bounds: expected [delta_c, delta_k]")
            return GripperModel(tuple(coeffs), (float(g.bounds[0]), float(g.bounds[1])))
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"gripper: {exc}") from None

    def scenario_spec(self, feedback: bool | None = None) -> ScenarioSpec:
        s = self.scenario
        d = s.disturbance
        spec = ScenarioSpec(
            model=self.gripper_model(), amplitude=s.amplitude, ref_start=s.ref_start, duration=s.duration,
            Ts=s.Ts, noise_sigma=s.noise.sigma, noise_seed=s.noise.seed,
            disturbance=DisturbanceSpec(d.finger, d.start, d.duration, d.amplitude, d.kind),
            perturbation_seed=s.perturbation.seed,
            feedback_enabled=self.controller.feedback if feedback is None else feedback,
            settle_band=s.settle_band, speed_limit=s.speed_limit)
        spec.validate()
        return spec

    def output_path(self) -> Path:
        p = Path(self.output_dir)
        return p if p.is_absolute() else self.base_dir / p

    def override_seed(self, seed: int) -> None:
        """Route one seed to every random source of the run."""
        self.scenario.noise.seed = seed
        if self.scenario.perturbation.seed is not None:
            self.scenario.perturbation.seed = seed
        self.analyze.seed = seed


def _type_ok(value: Any, hint) -> bool:
    origin = get_origin(hint)
    if origin is None:
        if hint is float:
            return isinstance(value, (int, float)) and not isinstance(value, bool)
        if hint is int:
            return isinstance(value, int) and not isinstance(value, bool)
        if hint is bool:
            return isinstance(value, bool)
        if hint is str:
            return isinstance(value, str)
        if hint is list:
            return isinstance(value, list)
        return True
    args = get_args(hint)
    if type(None) in args:
        return value is None or any(_type_ok(value, a) for a in args if a is not type(None))
    return any(_type_ok(value, a) for a in args)


def _build(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or '<root>'}: expected a table")
    hints = get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls) if f.name != "base_dir"}
    unknown = sorted(set(data) - names)
    if unknown:
        where = f"{path}.{unknown[0]}" if path else unknown[0]
        raise ConfigError(f"unknown key '{where}'")
    kwargs = {}
    for name, value in data.items():
        key = f"{path}.{name}" if path else name
        hint = hints[name]
        if dataclasses.is_dataclass(hint):
            kwargs[name] = _build(hint, value, key)
        elif cls is GripperConfig and name == "physical":
            if not isinstance(value, list):
                raise ConfigError(f"'{key}': expected an array of tables")
            kwargs[name] = [_build(PhysicalFinger, v, f"{key}[{i}]") for i, v in enumerate(value)]
        elif not _type_ok(value, hint):
            raise ConfigError(f"'{key}': bad type {type(value).__name__}")
        else:
            if hint is float or (get_origin(hint) and float in get_args(hint) and isinstance(value, int)):
                value = float(value) if value is not None else None
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{path or '<root>'}: {exc}") from None


def _check(cfg: Config) -> None:
    c, s = cfg.controller, cfg.scenario
    if c.inverse not in ("averaged", "gram"):
        raise ConfigError("'controller.inverse' must be 'averaged' or 'gram'")
    if not c.omega_c > 0:
        raise ConfigError("'controller.omega_c' must be > 0")
    if c.min_order < 1:
        raise ConfigError("'controller.min_order' must be >= 1")
    if c.fb_omega_c is not None and not c.fb_omega_c > 0:
        raise ConfigError("'controller.fb_omega_c' must be > 0")
    if s.compare not in ("none", "noise", "disturbance"):
        raise ConfigError("'scenario.compare' must be 'none', 'noise' or 'disturbance'")
    if s.noise.n_seeds < 1:
        raise ConfigError("'scenario.noise.n_seeds' must be >= 1")
    if s.disturbance.kind not in ("force", "output"):
        raise ConfigError("'scenario.disturbance.kind' must be 'force' or 'output'")
    if cfg.analyze.n_draws < 1 or cfg.analyze.n_omega < 10:
        raise ConfigError("'analyze' needs n_draws >= 1 and n_omega >= 10")
    cfg.gripper_model()
    cfg.scenario_spec()


def parse_config(text: str, base_dir: Path = Path(".")) -> Config:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML: {exc}") from None
    cfg = _build(Config, data, "")
    cfg.base_dir = base_dir
    _check(cfg)
    return cfg


def load_config(path) -> Config:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, path.parent)


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return resources.files("softsync.presets").joinpath(f"{name}.toml").read_text()


def load_preset(name: str) -> Config:
    return parse_config(preset_text(name))
