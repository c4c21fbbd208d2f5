"""Experiment configuration: strict JSON documents with defaults from the reference setup."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields

from .gradients import GradOptions
from .landscape import INIT_SCHEMES, LandscapeConfig
from .objectives import ObjectiveKind
from .optimize import AnnealParams, GrapeParams
from .propagator import ControlGrid
from .qmodel import GateKind, SystemKind, SystemSpec, make_gate


class ConfigError(ValueError):
    pass


@dataclass
class GateConfig:
    kind: str = "cnot"
    lambda_over_pi: float = 1.0

    def target(self):
        return make_gate(self.kind, self.lambda_over_pi * math.pi)


@dataclass
class GridConfig:
    T: float = 20.0
    K: int = 100


@dataclass
class LandscapeSection:
    runs: int = 100
    master_seed: int = 0
    init: str = "uniform_unit_cube"
    init_file: str | None = None
    gap_threshold: float = 0.15
    min_fraction: float = 0.05
    bins: int | str = "fd"


@dataclass
class SweepSection:
    epsilons: list = field(default_factory=lambda: [round(0.01 * i, 2) for i in range(11)])
    restarts: int = 3


@dataclass
class GradcheckSection:
    T: float = 4.0
    K: int = 20
    seed: int = 0
    fd_step: float = 1e-5
    threshold: float = 1e-4
    segments: list = field(default_factory=lambda: [20, 40, 80, 200])
    systems: list = field(default_factory=lambda: [1, 2, 3])
    gates: list = field(default_factory=lambda: ["cnot", "cz"])
    objectives: list = field(default_factory=lambda: ["sd", "grk-sd", "grk-sp"])


@dataclass
class Config:
    system: dict = field(default_factory=lambda: asdict(SystemSpec()))
    gate: GateConfig = field(default_factory=GateConfig)
    objective: str = "grk-sd"
    grid: GridConfig = field(default_factory=GridConfig)
    init: str = "guess"
    seed: int = 0
    grape: dict = field(default_factory=lambda: asdict(GrapeParams()))
    anneal: dict = field(default_factory=lambda: asdict(AnnealParams()))
    landscape: LandscapeSection = field(default_factory=LandscapeSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    gradcheck: GradcheckSection = field(default_factory=GradcheckSection)
    out: str = "out"

    # -- derived objects ---------------------------------------------------
    def system_spec(self) -> SystemSpec:
        return SystemSpec(**self.system)

    def gate_target(self):
        return self.gate.target()

    def control_grid(self) -> ControlGrid:
        return ControlGrid(self.grid.T, self.grid.K)

    def grape_params(self) -> GrapeParams:
        return GrapeParams(**self.grape)

    def anneal_params(self) -> AnnealParams:
        return AnnealParams(**self.anneal)

    def landscape_config(self) -> LandscapeConfig:
        spec = self.system_spec()
        extra = {k: v for k, v in self.system.items() if k not in ("kind", "epsilon")}
        gp = self.grape_params()
        return LandscapeConfig(
            system=int(spec.kind), gate=self.gate.kind, lambda_over_pi=self.gate.lambda_over_pi,
            objective=self.objective, T=self.grid.T, K=self.grid.K, epsilon=spec.epsilon,
            runs=self.landscape.runs, master_seed=self.landscape.master_seed,
            eps_acc=gp.eps_acc, max_iter=gp.max_iter, segments=gp.segments,
            init=self.landscape.init, init_file=self.landscape.init_file, system_params=extra,
        )

    def to_dict(self) -> dict:
        return asdict(self)

    def validate(self) -> "Config":
        try:
            spec = self.system_spec()
            self.gate_target()
            ObjectiveKind(self.objective)
            self.control_grid()
            self.grape_params()
            self.anneal_params()
            GradOptions(fd_step=self.gradcheck.fd_step)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        self.system = {**asdict(spec), "kind": int(spec.kind)}
        if self.init not in ("guess", "random", "file"):
            raise ConfigError(f"init must be guess, random or file, got {self.init!r}")
        if self.landscape.init not in INIT_SCHEMES:
            raise ConfigError(f"unknown landscape init {self.landscape.init!r}")
        GateKind(self.gate.kind)
        SystemKind(spec.kind)
        return self


_SECTIONS = {
    "gate": GateConfig,
    "grid": GridConfig,
    "landscape": LandscapeSection,
    "sweep": SweepSection,
    "gradcheck": GradcheckSection,
}
_PARAM_SECTIONS = {
    "system": SystemSpec,
    "grape": GrapeParams,
    "anneal": AnnealParams,
}


def _check_keys(section: str, data: dict, cls):
    allowed = {f.name for f in fields(cls)}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {section}: {', '.join(sorted(unknown))}")


def config_from_dict(data: dict) -> Config:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    _check_keys("config", data, Config)
    cfg = Config()
    for key, value in data.items():
        if key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"section {key} must be an object")
            _check_keys(key, value, _SECTIONS[key])
            setattr(cfg, key, _SECTIONS[key](**{**asdict(getattr(cfg, key)), **value}))
        elif key in _PARAM_SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"section {key} must be an object")
            _check_keys(key, value, _PARAM_SECTIONS[key])
            setattr(cfg, key, {**getattr(cfg, key), **value})
        else:
            setattr(cfg, key, value)
    return cfg.validate()


def load_config(path) -> Config:
    """Read a config file; a saved run record is accepted and its snapshot reused."""
    with open(path) as fh:
        data = json.load(fh)
    if isinstance(data, dict) and "config" in data and "final_value" in data:
        data = data["config"]
    return config_from_dict(data)
