"""Run configuration: YAML/JSON text validated into a :class:`RunConfig`."""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Annotated, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ParameterError
from .geometry import IfsSpec, make_sg, make_vicsek


def _parse_exponent(v):
    if isinstance(v, str):
        if v.strip().lower() in ("inf", "infinity", "+inf"):
            return math.inf
        return float(v)
    return v


def _parse_coordinate(v) -> Fraction:
    if isinstance(v, bool):
        raise ValueError("coordinate must be a number or a fraction string")
    if isinstance(v, (int, str)):
        return Fraction(v)
    if isinstance(v, float):
        return Fraction(v)
    raise ValueError(f"cannot read coordinate {v!r}")


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class SgFractal(Strict):
    type: Literal["sg"]


class VicsekFractal(Strict):
    type: Literal["vicsek"]
    L: int = Field(ge=1)
    N: int = Field(ge=2)


Fractal = Annotated[Union[SgFractal, VicsekFractal], Field(discriminator="type")]


class Junction(Strict):
    """The V_1 vertex F_i(q_j) = F_j(q_i) shared by the cells i and j (0-based)."""

    junction: tuple[int, int]


class KernelConfig(Strict):
    kind: Literal["heat", "resolvent", "riesz"]
    params: list[float] = Field(min_length=1)
    min_resistance: Optional[float] = None
    x: Optional[Union[list, Literal["farthest"]]] = "farthest"
    c: Optional[float] = None
    trials: int = Field(default=0, ge=0)
    embedding_p: Optional[Union[float, str]] = None

    @field_validator("embedding_p", mode="before")
    @classmethod
    def _p(cls, v):
        v = _parse_exponent(v)
        if v is not None and not v > 1:
            raise ValueError("embedding_p must be > 1")
        return v


class ProfileConfig(Strict):
    kind: Literal["power", "centered_square", "square", "affine"]
    xi: float = 2.0
    C: float = 1.0
    a: float = 1.0
    b: float = 0.0


class RunConfig(Strict):
    fractal: Fractal
    level: int = Field(default=4, ge=0)
    bc: Literal["dirichlet", "neumann"] = "dirichlet"
    s: Optional[float] = None
    alpha: Optional[float] = None
    p: float = math.inf
    Q: float = math.inf
    seed: int = 0
    levels: Optional[list[int]] = None
    q: Optional[Union[Junction, list]] = None
    w: Optional[str] = None
    f: Literal["ones", "bump", "random"] = "bump"
    bump_center: Optional[list] = None
    u_source: Literal["harmonic", "bump"] = "harmonic"
    boundary_values: Optional[list[Union[int, str]]] = None
    norm_levels: list[int] = Field(default_factory=lambda: [3, 4, 5, 6])
    phi: Optional[ProfileConfig] = None
    selector: Literal["general", "sg", "vicsek", "embedding", "existence"] = "general"
    kernel: Optional[KernelConfig] = None
    gap_levels: Optional[list[int]] = None
    k: Optional[int] = Field(default=None, ge=1)
    out: Optional[str] = None

    @field_validator("p", "Q", mode="before")
    @classmethod
    def _exponent(cls, v):
        return _parse_exponent(v)

    @field_validator("p")
    @classmethod
    def _p_range(cls, v):
        if not v > 1:
            raise ValueError("p must be > 1")
        return v

    @field_validator("Q")
    @classmethod
    def _q_range(cls, v):
        if not v >= 1:
            raise ValueError("Q must be >= 1")
        return v

    @field_validator("q", "bump_center", mode="after")
    @classmethod
    def _coords(cls, v):
        if isinstance(v, list):
            return [_parse_coordinate(c) for c in v]
        return v

    @model_validator(mode="after")
    def _exponents(self):
        if self.s is not None and self.alpha is not None:
            raise ValueError("give at most one of s and alpha")
        if self.s is not None and not 0 < self.s < 1:
            raise ValueError("s must lie in (0, 1)")
        if self.alpha is not None and not 0 < self.alpha < 2:
            raise ValueError("alpha must lie in (0, 2)")
        if self.levels is not None:
            if len(set(self.levels)) != len(self.levels) or sorted(self.levels) != self.levels:
                raise ValueError("levels must be strictly increasing")
            if self.levels and self.levels[0] < 0:
                raise ValueError("levels must be non-negative")
        return self

    @property
    def s_value(self) -> Optional[float]:
        if self.s is not None:
            return self.s
        return None if self.alpha is None else self.alpha / 2


def build_spec(cfg: RunConfig) -> IfsSpec:
    if cfg.fractal.type == "sg":
        return make_sg()
    return make_vicsek(cfg.fractal.L, cfg.fractal.N)


class ConfigError(ParameterError):
    """Invalid configuration; the message names the offending field path."""


def parse_config(text: str) -> RunConfig:
    """Validate a YAML or JSON document; the first error is reported with its path."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML/JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        path = ".".join(str(p) for p in err["loc"]) or "<root>"
        raise ConfigError(f"{path}: {err['msg']}") from None


def resolved(cfg: RunConfig) -> dict:
    """The validated config as plain data (fractions as strings, inf as "inf")."""

    def conv(v):
        if isinstance(v, Fraction):
            return str(v)
        if isinstance(v, float) and math.isinf(v):
            return "inf"
        if isinstance(v, dict):
            return {k: conv(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [conv(x) for x in v]
        return v

    return conv(cfg.model_dump())
