"""Experiment configuration: strict JSON schema with round-trip serialization."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields

from .ensemble import EnsembleParams, PulseParams
from .qnd import MeasurementSchedule, make_schedule


class ConfigError(ValueError):
    """Raised for unknown keys, wrong types, or invalid values."""


@dataclass(frozen=True)
class EnsembleConfig:
    n_atoms: int = 1_000_000
    j: float = 1.0


@dataclass(frozen=True)
class PulseConfig:
    s0: float = 5e7
    omega: float = 1.0
    q_factor: float | None = None  # None: 1 for j=1/2, 8/9 for j=1


@dataclass(frozen=True)
class ScheduleConfig:
    axes: tuple[str, ...] = ("x", "y", "z")
    durations: tuple[float, ...] = (2.0, 2.0, 2.0)  # units of tau
    grid_points: int = 64


@dataclass(frozen=True)
class LossConfig:
    alphas: tuple[float, ...] = (50.0, 75.0, 100.0)  # lossy traces; empty = none


@dataclass(frozen=True)
class FeedbackConfig:
    mode: str = "reset"
    noise_c: float = 0.0
    readout: str = "deterministic"  # deterministic | sampled


@dataclass(frozen=True)
class PostselectConfig:
    threshold_ratio: float | None = None


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "."
    format: str = "table"  # table | plot | both


@dataclass(frozen=True)
class ExperimentConfig:
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    pulse: PulseConfig = field(default_factory=PulseConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    feedback: FeedbackConfig = field(default_factory=FeedbackConfig)
    postselect: PostselectConfig = field(default_factory=PostselectConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    seed: int = 12345

    def __post_init__(self):
        if self.ensemble.n_atoms < 1:
            raise ConfigError(f"ensemble.n_atoms must be >= 1, got {self.ensemble.n_atoms}")
        two_j = 2 * self.ensemble.j
        if two_j <= 0 or abs(two_j - round(two_j)) > 1e-12:
            raise ConfigError(f"ensemble.j must be a positive half-integer, got {self.ensemble.j}")
        if self.pulse.s0 <= 0 or self.pulse.omega <= 0:
            raise ConfigError("pulse.s0 and pulse.omega must be positive")
        if self.pulse.q_factor is not None and not 0.0 < self.pulse.q_factor <= 1.0:
            raise ConfigError(f"pulse.q_factor must lie in (0, 1], got {self.pulse.q_factor}")
        if len(self.schedule.axes) != len(self.schedule.durations):
            raise ConfigError("schedule.axes and schedule.durations must have equal length")
        if any(a not in ("x", "y", "z") for a in self.schedule.axes):
            raise ConfigError(f"schedule.axes entries must be x, y or z, got {self.schedule.axes}")
        if any(d <= 0 for d in self.schedule.durations):
            raise ConfigError(f"schedule.durations must be positive, got {self.schedule.durations}")
        if self.schedule.grid_points < 2:
            raise ConfigError(f"schedule.grid_points must be >= 2, got {self.schedule.grid_points}")
        if any(a <= 0 for a in self.loss.alphas):
            raise ConfigError(f"loss.alphas must be positive, got {self.loss.alphas}")
        if self.feedback.mode not in ("reset", "reset-with-noise", "postselect"):
            raise ConfigError(f"feedback.mode unknown: {self.feedback.mode!r}")
        if self.feedback.readout not in ("deterministic", "sampled"):
            raise ConfigError(f"feedback.readout unknown: {self.feedback.readout!r}")
        if self.feedback.noise_c < 0:
            raise ConfigError(f"feedback.noise_c must be nonnegative, got {self.feedback.noise_c}")
        tr = self.postselect.threshold_ratio
        if tr is not None and tr <= 0:
            raise ConfigError(f"postselect.threshold_ratio must be positive, got {tr}")
        if self.output.format not in ("table", "plot", "both"):
            raise ConfigError(f"output.format must be table, plot or both, got {self.output.format}")
        if self.feedback.mode == "postselect" and tr is None:
            raise ConfigError("feedback.mode postselect needs postselect.threshold_ratio")

    # -- domain object construction -------------------------------------------------

    def ensemble_params(self) -> EnsembleParams:
        return EnsembleParams(n_atoms=self.ensemble.n_atoms, j=self.ensemble.j)

    def pulse_params(self, alpha: float = math.inf) -> PulseParams:
        return PulseParams(s0=self.pulse.s0, omega=self.pulse.omega, alpha=alpha,
                           q_factor=self.pulse.q_factor)

    def schedule_for(self, alpha: float | None = None) -> MeasurementSchedule:
        rule = None
        if self.feedback.mode == "postselect":
            from .postselect import make_rule

            rule = make_rule(self.postselect.threshold_ratio)
        if len(set(self.schedule.durations)) == 1:
            return make_schedule(axes="".join(self.schedule.axes),
                                 duration=self.schedule.durations[0],
                                 points=self.schedule.grid_points, alpha=alpha,
                                 feedback_mode=self.feedback.mode,
                                 noise_c=self.feedback.noise_c, postselect_rule=rule)
        import numpy as np

        from .qnd import Segment

        segments = tuple(
            Segment(axis=a, duration=d,
                    grid=tuple(np.linspace(0.0, d, self.schedule.grid_points)[1:]))
            for a, d in zip(self.schedule.axes, self.schedule.durations)
        )
        return MeasurementSchedule(segments=segments, alpha=alpha,
                                   feedback_mode=self.feedback.mode,
                                   noise_c=self.feedback.noise_c, postselect_rule=rule)


_SECTIONS = {
    "ensemble": EnsembleConfig,
    "pulse": PulseConfig,
    "schedule": ScheduleConfig,
    "loss": LossConfig,
    "feedback": FeedbackConfig,
    "postselect": PostselectConfig,
    "output": OutputConfig,
}

_TUPLE_FIELDS = {"axes", "durations", "alphas"}


def _build_section(cls, data: dict, path: str):
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} under '{path}'")
    kwargs = {}
    for name, value in data.items():
        if name in _TUPLE_FIELDS:
            if not isinstance(value, list):
                raise ConfigError(f"'{path}.{name}' must be a list")
            value = tuple(value)
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad value under '{path}': {exc}") from exc


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError(f"config root must be an object, got {type(data).__name__}")
    unknown = set(data) - set(_SECTIONS) - {"seed"}
    if unknown:
        raise ConfigError(f"unknown top-level key(s) {sorted(unknown)}")
    kwargs = {}
    for section, cls in _SECTIONS.items():
        if section in data:
            if not isinstance(data[section], dict):
                raise ConfigError(f"'{section}' must be an object")
            kwargs[section] = _build_section(cls, data[section], section)
    if "seed" in data:
        if not isinstance(data["seed"], int) or isinstance(data["seed"], bool):
            raise ConfigError(f"'seed' must be an integer, got {data['seed']!r}")
        kwargs["seed"] = data["seed"]
    return ExperimentConfig(**kwargs)


def config_to_dict(config: ExperimentConfig) -> dict:
    out: dict = {}
    for section, cls in _SECTIONS.items():
        block = getattr(config, section)
        out[section] = {
            f.name: list(v) if isinstance(v := getattr(block, f.name), tuple) else v
            for f in fields(cls)
        }
    out["seed"] = config.seed
    return out


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data)


def dump_config(config: ExperimentConfig, path: str | None = None) -> str:
    text = json.dumps(config_to_dict(config), indent=2, sort_keys=True)
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return text
