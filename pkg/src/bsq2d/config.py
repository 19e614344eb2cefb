"""Experiment configuration parsed from TOML.

Sections mirror the experiment: ``[model]``, ``[grid]``, ``[solver]``,
``[initial]`` (with an optional ``[initial.potential]``) and
``[experiment]``.  Unknown keys are rejected everywhere.  Lengths may be
given as numbers or as strings such as ``"16pi"`` or ``"2.5*pi"``.
"""
from __future__ import annotations

import json
import math
import os
import re
import sys
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .diagonal import PhysicalState
from .evolution import Scheme, SolverConfig
from .initial import gaussian_field, make_state, random_bandlimited_field, single_mode_field
from .models import ABCDParams
from .spectral import Grid2D

__all__ = [
    "ConfigError",
    "ModelSpec",
    "GridSpec",
    "SolverSpec",
    "InitialSpec",
    "PotentialSpec",
    "SimulateSpec",
    "LifespanSpec",
    "ConvergenceSpec",
    "EstimatesSpec",
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "ENV_PREFIX",
]

ENV_PREFIX = "BSQ2D_"
_PI_LENGTH = re.compile(r"^\s*([0-9.eE+-]*)\s*\*?\s*pi\s*$")


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


def _length(value):
    if isinstance(value, str):
        m = _PI_LENGTH.match(value)
        if not m:
            raise ValueError(f"cannot read length {value!r}")
        return (float(m.group(1)) if m.group(1) else 1.0) * math.pi
    return value


class ModelSpec(_Strict):
    a: float = 1.0
    b: float = 0.0
    c: float = 1.0
    d: float = 0.0
    epsilon: float = 0.1

    def params(self, epsilon: Optional[float] = None) -> ABCDParams:
        return ABCDParams(self.a, self.b, self.c, self.d, self.epsilon if epsilon is None else epsilon)

    @property
    def is_scaled_kdv(self) -> bool:
        return self.a == 1 and self.c == 1 and self.b == 0 and self.d == 0


class GridSpec(_Strict):
    nx: int = 128
    ny: int = 128
    Lx: float = 16 * math.pi
    Ly: float = 16 * math.pi

    @field_validator("Lx", "Ly", mode="before")
    @classmethod
    def _lengths(cls, v):
        return _length(v)

    def build(self, nx: Optional[int] = None, ny: Optional[int] = None) -> Grid2D:
        return Grid2D(nx or self.nx, ny or self.ny, self.Lx, self.Ly)


class SolverSpec(_Strict):
    dt: float = 0.01
    t_end: float = 1.0
    scheme: Scheme = Scheme.IFRK4
    dealias: bool = True
    diagnostics_stride: int = Field(1, ge=1)
    snapshot_stride: int = Field(0, ge=0)
    nonlinear: bool = True
    sobolev_s: float = 2.0
    blowup_factor: float = 1e3
    stop_factor: Optional[float] = None

    def build(self, **overrides) -> SolverConfig:
        fields = self.model_dump()
        fields.update(overrides)
        return SolverConfig(**fields)


class PotentialSpec(_Strict):
    amplitude: float
    width: float
    center: Optional[tuple[float, float]] = None


class InitialSpec(_Strict):
    family: Literal["gaussian", "single_mode", "random_bandlimited", "zero"] = "gaussian"
    amplitude: float = 1.0
    width: float = 2.0
    width_y: Optional[float] = None
    center: Optional[tuple[float, float]] = None
    index: tuple[int, int] = (1, 0)
    seed: Optional[int] = None
    band: float = 2.0
    velocity: Literal["zero", "potential", "unidirectional"] = "unidirectional"
    potential: Optional[PotentialSpec] = None

    @model_validator(mode="after")
    def _potential_needed(self):
        if self.velocity == "potential" and self.potential is None:
            raise ValueError("velocity = 'potential' needs an [initial.potential] table")
        return self

    def build(self, grid: Grid2D, seed: int = 0, scale: float = 1.0) -> PhysicalState:
        """Initial state on ``grid``; ``scale`` multiplies every amplitude."""
        amp = self.amplitude * scale
        if self.family == "gaussian":
            eta = gaussian_field(grid, amp, self.width, self.center, self.width_y)
        elif self.family == "single_mode":
            eta = single_mode_field(grid, self.index, amp)
        elif self.family == "random_bandlimited":
            eta = random_bandlimited_field(grid, seed if self.seed is None else self.seed, self.band, amp)
        else:
            eta = gaussian_field(grid, 0.0, 1.0)
        phi = None
        if self.potential is not None:
            p = self.potential
            phi = gaussian_field(grid, p.amplitude * scale, p.width, p.center)
        return make_state(eta, self.velocity, phi)


class SimulateSpec(_Strict):
    kind: Literal["simulate"] = "simulate"


class LifespanSpec(_Strict):
    """Doubling-time sweep over decreasing ``epsilons``.

    Runs stop at ``t_max_coefficient / eps``.  The boundedness check reruns
    the data scaled by ``small_amplitude_factor`` on ``[0, window / sqrt(eps)]``.
    """

    kind: Literal["lifespan"] = "lifespan"
    epsilons: list[float] = [0.2, 0.1, 0.05, 0.025]
    t_max_coefficient: float = 40.0
    exponent_bound: float = -0.3
    small_amplitude_factor: float = 1.0 / 12.0
    window: float = 1.0
    bound_factor: float = 2.0

    @field_validator("epsilons")
    @classmethod
    def _decreasing(cls, v):
        if len(v) < 3:
            raise ValueError("a lifespan scan needs at least three epsilon values")
        if any(b >= a for a, b in zip(v, v[1:])):
            raise ValueError("epsilon values must be strictly decreasing")
        if any(not (0 < e <= 1) for e in v):
            raise ValueError("epsilon values must lie in (0, 1]")
        return v


class ConvergenceSpec(_Strict):
    kind: Literal["convergence"] = "convergence"
    dts: list[float] = [0.2, 0.1, 0.05, 0.025]
    nxs: list[int] = [64, 128, 256]
    t_end: Optional[float] = None

    @field_validator("dts")
    @classmethod
    def _ratio_two(cls, v):
        if len(v) < 3:
            raise ValueError("temporal convergence needs at least three step sizes")
        if any(abs(a / b - 2.0) > 1e-9 for a, b in zip(v, v[1:])):
            raise ValueError("successive step sizes must halve")
        return v

    @field_validator("nxs")
    @classmethod
    def _grid_doubling(cls, v):
        if len(v) < 2 or any(b != 2 * a for a, b in zip(v, v[1:])):
            raise ValueError("grid sizes must double")
        return v


ESTIMATE_NAMES = (
    "exponents",
    "decay_small_t",
    "decay_large_t",
    "strichartz",
    "local_smoothing",
    "maximal",
    "oscillatory",
    "bessel",
)


class EstimatesSpec(_Strict):
    kind: Literal["estimates"] = "estimates"
    names: list[Literal[ESTIMATE_NAMES]] = ["exponents", "decay_small_t", "decay_large_t"]


ExperimentSpec = Union[SimulateSpec, LifespanSpec, ConvergenceSpec, EstimatesSpec]


class ExperimentConfig(_Strict):
    seed: int = 0
    model: ModelSpec = ModelSpec()
    grid: GridSpec = GridSpec()
    solver: SolverSpec = SolverSpec()
    initial: InitialSpec = InitialSpec()
    experiment: ExperimentSpec = Field(default_factory=SimulateSpec, discriminator="kind")

    def resolved_json(self) -> str:
        """Canonical one-line JSON of the full configuration."""
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def with_seed(self, seed: Optional[int]) -> "ExperimentConfig":
        return self if seed is None else self.model_copy(update={"seed": int(seed)})


def _format_error(err: ValidationError) -> str:
    parts = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"])
        parts.append(f"{loc}: {e['msg']}")
    return "; ".join(parts)


def parse_config(data: Union[dict, str]) -> ExperimentConfig:
    """Build a config from a dict or TOML text."""
    if isinstance(data, str):
        try:
            data = tomllib.loads(data)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML: {exc}") from exc
    data = dict(data)
    exp = data.get("experiment")
    if isinstance(exp, dict) and "kind" not in exp:
        raise ConfigError("experiment.kind is required")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_error(exc)) from exc


def load_config(path: Union[str, Path, None]) -> ExperimentConfig:
    """Read a TOML file; ``None`` gives the defaults.  ``BSQ2D_SEED``
    overrides the seed."""
    if path is None:
        cfg = ExperimentConfig()
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        cfg = parse_config(text)
    env_seed = os.environ.get(ENV_PREFIX + "SEED")
    if env_seed is not None:
        try:
            cfg = cfg.with_seed(int(env_seed))
        except ValueError as exc:
            raise ConfigError(f"{ENV_PREFIX}SEED must be an integer") from exc
    return cfg
