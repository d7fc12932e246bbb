"""Declarative run configuration (JSON) with strict schema checks.

Every section is a dataclass; the loader walks the JSON tree, rejects
unknown keys (with a close-match suggestion), converts types and checks
ranges, and reports problems by their dotted key path, e.g.
``grid.n_points must be >= 2``.
"""
from __future__ import annotations

import difflib
import hashlib
import json
import os
import types
import typing
from dataclasses import MISSING, asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from .densities import Distribution, distribution_from_dict
from .models import MODELS, ResponseModel
from .optimizer import DensityMatchProblem, OptimizerConfig
from .quadrature import QuadratureGrid, trapezoid_grid
from .rdo import NSGA2Config

OUTPUT_ROOT_ENV = "DENSMATCH_OUTPUT_ROOT"


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key path."""


@dataclass(frozen=True)
class ModelSection:
    type: str
    lower: list[float] | None = None
    upper: list[float] | None = None
    s0: list[float] | None = None


@dataclass(frozen=True)
class GridSection:
    f_lower: float = -100.0
    f_upper: float = 150.0
    n_points: int = 2500


@dataclass(frozen=True)
class KDESection:
    m_samples: int = 100_000
    stage1_bandwidth: float | None = None  # None: (f_upper - f_lower) / 5
    stage1_iterations: int = 3
    stage2_bandwidth: float | str = 1.0  # a number or "scott"
    scott_rounds: int = 6


@dataclass(frozen=True)
class OptimizerSection:
    max_iterations: int = 200
    gradient_tolerance: float = 1e-8
    step_tolerance: float = 1e-10
    armijo: float = 1e-4
    backtrack: float = 0.5
    initial_step: float = 0.1


@dataclass(frozen=True)
class SurrogateSection:
    points: int = 21
    degree: int = 5


@dataclass(frozen=True)
class RDOSection:
    population: int = 100
    generations: int = 35
    crossover_probability: float = 0.9
    mutation_probability: float | None = None  # None: 1 / n per variable
    crossover_eta: float = 20.0
    mutation_eta: float = 20.0
    penalty: float = 1e6
    m_samples: int | None = None  # None: kde.m_samples


@dataclass(frozen=True)
class RunConfig:
    model: ModelSection
    target: dict | None = None
    uncertainty: dict | None = None
    grid: GridSection = field(default_factory=GridSection)
    kde: KDESection = field(default_factory=KDESection)
    optimizer: OptimizerSection = field(default_factory=OptimizerSection)
    response_pdf: str = "kde"
    surrogate: SurrogateSection | None = None
    rdo: RDOSection = field(default_factory=RDOSection)
    seed: int = 0
    output: str | None = None

    # -- derived objects ---------------------------------------------------

    def build_model(self) -> ResponseModel:
        return build_model(self.model, self.uncertainty)

    def build_target(self) -> Distribution:
        if self.target is None:
            raise ConfigError("target is required for this command")
        return distribution_from_dict(self.target)

    def build_grid(self) -> QuadratureGrid:
        g = self.grid
        return trapezoid_grid(g.f_lower, g.f_upper, g.n_points)

    def optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(**asdict(self.optimizer))

    def nsga2_config(self) -> NSGA2Config:
        r = self.rdo
        return NSGA2Config(population=r.population, generations=r.generations,
                           crossover_probability=r.crossover_probability,
                           mutation_probability=r.mutation_probability,
                           crossover_eta=r.crossover_eta, mutation_eta=r.mutation_eta,
                           seed=self.seed, penalty=r.penalty)

    def surrogate_spec(self) -> tuple[int, int] | None:
        return None if self.surrogate is None else (self.surrogate.points, self.surrogate.degree)

    def problem(self) -> DensityMatchProblem:
        model = self.build_model()
        if self.surrogate is not None:
            from .models import RefittingSurrogate
            model = RefittingSurrogate(model, *self.surrogate_spec())
        return DensityMatchProblem(
            model=model,
            target=self.build_target(),
            grid=self.build_grid(),
            s0=None if self.model.s0 is None else np.asarray(self.model.s0, dtype=float),
            m_samples=self.kde.m_samples,
            seed=self.seed,
            stage1_bandwidth=self.kde.stage1_bandwidth,
            stage1_iterations=self.kde.stage1_iterations,
            stage2_bandwidth=self.kde.stage2_bandwidth,
            response_pdf=self.response_pdf,
            optimizer=self.optimizer_config(),
            scott_rounds=self.kde.scott_rounds,
        )

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form (defaults applied)."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def output_dir(self, fallback_name: str = "run") -> Path:
        if self.output is not None:
            return Path(self.output)
        return Path(os.environ.get(OUTPUT_ROOT_ENV, "runs")) / fallback_name


def build_model(section: ModelSection, uncertainty: dict | None = None) -> ResponseModel:
    cls = MODELS[section.type]
    kwargs: dict[str, Any] = {}
    if uncertainty is not None:
        kwargs["uncertainty"] = distribution_from_dict(uncertainty)
    if section.lower is not None or section.upper is not None:
        if cls is MODELS["synthetic-airfoil"]:
            raise ConfigError("model.lower/model.upper: synthetic-airfoil has a fixed design box")
        if section.lower is not None:
            kwargs["lower"] = np.asarray(section.lower, dtype=float)
        if section.upper is not None:
            kwargs["upper"] = np.asarray(section.upper, dtype=float)
    try:
        model = cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from exc
    if section.s0 is not None:
        s0 = np.asarray(section.s0, dtype=float)
        if s0.shape != model.lower.shape:
            raise ConfigError(f"model.s0 must have {model.n} entries, got {s0.size}")
        if np.any(s0 < model.lower) or np.any(s0 > model.upper):
            raise ConfigError("model.s0 lies outside the design box")
    return model


# --- loading ---------------------------------------------------------------


def _type_name(tp) -> str:
    return getattr(tp, "__name__", str(tp))


def _convert(tp, value, path: str):
    origin = typing.get_origin(tp)
    if origin in (typing.Union, types.UnionType):
        options = typing.get_args(tp)
        if value is None:
            if type(None) in options:
                return None
            raise ConfigError(f"{path} must not be null")
        errors = []
        for opt in options:
            if opt is type(None):
                continue
            try:
                return _convert(opt, value, path)
            except ConfigError as exc:
                errors.append(exc)
        names = " or ".join(_type_name(o) for o in options if o is not type(None))
        raise ConfigError(f"{path} must be {names}, got {value!r}")
    if origin is list:
        (item,) = typing.get_args(tp)
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            value = [value]
        if not isinstance(value, list):
            raise ConfigError(f"{path} must be a list, got {value!r}")
        return [_convert(item, v, f"{path}[{i}]") for i, v in enumerate(value)]
    if tp is dict:
        if not isinstance(value, dict):
            raise ConfigError(f"{path} must be an object, got {value!r}")
        return value
    if tp is bool or isinstance(value, bool):
        if tp is bool and isinstance(value, bool):
            return value
        raise ConfigError(f"{path} must be {_type_name(tp)}, got {value!r}")
    if tp is int:
        if isinstance(value, int) or (isinstance(value, float) and value.is_integer()):
            return int(value)
        raise ConfigError(f"{path} must be an integer, got {value!r}")
    if tp is float:
        if isinstance(value, (int, float)):
            return float(value)
        raise ConfigError(f"{path} must be a number, got {value!r}")
    if tp is str:
        if isinstance(value, str):
            return value
        raise ConfigError(f"{path} must be a string, got {value!r}")
    if isinstance(tp, type) and hasattr(tp, "__dataclass_fields__"):
        return _build(tp, value, path)
    raise TypeError(f"unsupported schema type {tp!r}")  # pragma: no cover


def _build(cls, data, path: str):
    where = path or "config"
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be an object, got {data!r}")
    hints = typing.get_type_hints(cls)
    known = {f.name: f for f in fields(cls)}
    for key in data:
        if key not in known:
            close = difflib.get_close_matches(key, known, n=1)
            hint = f"; did you mean {path + '.' if path else ''}{close[0]}?" if close else ""
            raise ConfigError(f"unknown key {path + '.' if path else ''}{key}{hint}")
    kwargs = {}
    for name, f in known.items():
        sub = f"{path}.{name}" if path else name
        if name in data:
            kwargs[name] = _convert(hints[name], data[name], sub)
        elif f.default is MISSING and f.default_factory is MISSING:
            raise ConfigError(f"missing required key {sub}")
    return cls(**kwargs)


def _require(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


def _check(cfg: RunConfig) -> None:
    _require(cfg.model.type in MODELS,
             f"model.type must be one of {sorted(MODELS)}, got {cfg.model.type!r}")
    g = cfg.grid
    _require(g.n_points >= 2, "grid.n_points must be >= 2")
    _require(g.f_lower < g.f_upper, "grid.f_lower must be < grid.f_upper")
    k = cfg.kde
    _require(k.m_samples >= 1, "kde.m_samples must be >= 1")
    _require(k.stage1_iterations >= 0, "kde.stage1_iterations must be >= 0")
    _require(k.stage1_bandwidth is None or k.stage1_bandwidth > 0, "kde.stage1_bandwidth must be > 0")
    _require(k.scott_rounds >= 1, "kde.scott_rounds must be >= 1")
    if isinstance(k.stage2_bandwidth, str):
        _require(k.stage2_bandwidth == "scott",
                 f"kde.stage2_bandwidth must be a number or \"scott\", got {k.stage2_bandwidth!r}")
    else:
        _require(k.stage2_bandwidth > 0, "kde.stage2_bandwidth must be > 0")
    _require(cfg.response_pdf in ("kde", "analytic"),
             f"response_pdf must be \"kde\" or \"analytic\", got {cfg.response_pdf!r}")
    try:
        cfg.optimizer_config()
    except ValueError as exc:
        raise ConfigError(f"optimizer: {exc}") from exc
    if cfg.surrogate is not None:
        _require(cfg.surrogate.degree >= 0, "surrogate.degree must be >= 0")
        _require(cfg.surrogate.points > cfg.surrogate.degree, "surrogate.points must exceed surrogate.degree")
    r = cfg.rdo
    _require(r.population >= 2 and r.population % 2 == 0, "rdo.population must be an even number >= 2")
    _require(r.generations >= 0, "rdo.generations must be >= 0")
    _require(0 <= r.crossover_probability <= 1, "rdo.crossover_probability must lie in [0, 1]")
    _require(r.mutation_probability is None or 0 <= r.mutation_probability <= 1,
             "rdo.mutation_probability must lie in [0, 1]")
    _require(r.m_samples is None or r.m_samples >= 1, "rdo.m_samples must be >= 1")
    for name in ("target", "uncertainty"):
        spec = getattr(cfg, name)
        if spec is not None:
            try:
                distribution_from_dict(spec)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"{name}: {exc}") from exc
    build_model(cfg.model, cfg.uncertainty)


def config_from_dict(data: dict) -> RunConfig:
    cfg = _build(RunConfig, data, "")
    _check(cfg)
    return cfg


def parse_config(path) -> RunConfig:
    """Load and validate a JSON run configuration, applying defaults."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return config_from_dict(data)
