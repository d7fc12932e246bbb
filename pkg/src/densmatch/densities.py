"""Univariate distributions used as target densities and as the law of the
uncertain parameter.

All distributions are immutable. Sampling goes through :func:`make_rng`, a
Philox (counter-based) generator, so a ``(distribution, seed, M)`` triple
always produces the same draws.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import special, stats


def make_rng(seed: int) -> np.random.Generator:
    """Seeded counter-based generator shared by every stochastic routine."""
    return np.random.Generator(np.random.Philox(int(seed)))


def derive_seed(seed: int, *keys: int) -> int:
    """Independent integer seed for a sub-stream (e.g. an optimizer stage)."""
    ss = np.random.SeedSequence([int(seed), *[int(k) for k in keys]])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


class Distribution:
    """Base class. Subclasses implement ``pdf``, ``_draw`` and ``moments``."""

    kind = "abstract"

    def pdf(self, x):
        raise NotImplementedError

    def _draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def moments(self) -> tuple[float, float]:
        raise NotImplementedError

    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    def domain(self, tail: float = 1e-12) -> tuple[float, float]:
        """Finite interval holding all but ``tail`` mass on each side."""
        return self.support()

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class Uniform(Distribution):
    lower: float
    upper: float
    kind = "uniform"

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError(f"uniform requires lower < upper, got [{self.lower}, {self.upper}]")

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x >= self.lower) & (x <= self.upper)
        return np.where(inside, 1.0 / (self.upper - self.lower), 0.0)

    def _draw(self, rng, size):
        return rng.uniform(self.lower, self.upper, size)

    def moments(self):
        width = self.upper - self.lower
        return 0.5 * (self.lower + self.upper), width**2 / 12.0

    def support(self):
        return float(self.lower), float(self.upper)

    def to_dict(self):
        return {"type": "uniform", "lower": self.lower, "upper": self.upper}


@dataclass(frozen=True)
class Gaussian(Distribution):
    """Normal law parameterised by mean and *variance*."""

    mean: float
    variance: float
    kind = "gaussian"

    def __post_init__(self):
        if not self.variance > 0:
            raise ValueError(f"gaussian requires variance > 0, got {self.variance}")

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    def pdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mean) / self.std
        return np.exp(-0.5 * z * z) / (math.sqrt(2.0 * math.pi) * self.std)

    def _draw(self, rng, size):
        return rng.normal(self.mean, self.std, size)

    def moments(self):
        return float(self.mean), float(self.variance)

    def support(self):
        return -math.inf, math.inf

    def domain(self, tail=1e-12):
        z = stats.norm.isf(tail)
        return self.mean - z * self.std, self.mean + z * self.std

    def to_dict(self):
        return {"type": "gaussian", "mean": self.mean, "variance": self.variance}


@dataclass(frozen=True)
class ScaledBeta(Distribution):
    """Beta(alpha, beta) mapped affinely onto [lower, upper]."""

    alpha: float
    beta: float
    lower: float = 0.0
    upper: float = 1.0
    kind = "beta"

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("beta requires alpha > 0 and beta > 0")
        if not self.lower < self.upper:
            raise ValueError(f"beta requires lower < upper, got [{self.lower}, {self.upper}]")

    def pdf(self, x):
        width = self.upper - self.lower
        y = (np.asarray(x, dtype=float) - self.lower) / width
        inside = (y >= 0.0) & (y <= 1.0)
        yc = np.clip(y, 0.0, 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            logp = (
                special.xlog1py(self.beta - 1.0, -yc)
                + special.xlogy(self.alpha - 1.0, yc)
                - special.betaln(self.alpha, self.beta)
            )
            out = np.exp(logp) / width
        return np.where(inside, out, 0.0)

    def _draw(self, rng, size):
        return self.lower + (self.upper - self.lower) * rng.beta(self.alpha, self.beta, size)

    def moments(self):
        a, b = self.alpha, self.beta
        width = self.upper - self.lower
        mean = self.lower + width * a / (a + b)
        var = width**2 * a * b / ((a + b) ** 2 * (a + b + 1.0))
        return mean, var

    def skewness(self) -> float:
        a, b = self.alpha, self.beta
        return 2.0 * (b - a) * math.sqrt(a + b + 1.0) / ((a + b + 2.0) * math.sqrt(a * b))

    def support(self):
        return float(self.lower), float(self.upper)

    def to_dict(self):
        return {"type": "beta", "alpha": self.alpha, "beta": self.beta,
                "lower": self.lower, "upper": self.upper}


@dataclass(frozen=True, eq=False)
class Tabulated(Distribution):
    """Piecewise-linear density through ``(nodes, values)``, renormalised so its
    trapezoid integral is one. Zero outside the node range."""

    nodes: np.ndarray
    values: np.ndarray
    _cdf: np.ndarray = field(init=False, repr=False)
    kind = "tabulated"

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float).copy()
        values = np.asarray(self.values, dtype=float).copy()
        if nodes.ndim != 1 or nodes.size < 2:
            raise ValueError("tabulated density needs at least 2 nodes")
        if nodes.shape != values.shape:
            raise ValueError("nodes and values must have the same length")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("tabulated nodes must be strictly increasing")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("tabulated values must be finite and non-negative")
        mass = np.sum(0.5 * (values[1:] + values[:-1]) * np.diff(nodes))
        if mass <= 0:
            raise ValueError("tabulated density has zero mass")
        values /= mass
        cdf = np.concatenate([[0.0], np.cumsum(0.5 * (values[1:] + values[:-1]) * np.diff(nodes))])
        nodes.flags.writeable = False
        values.flags.writeable = False
        cdf.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_cdf", cdf)

    def pdf(self, x):
        return np.interp(np.asarray(x, dtype=float), self.nodes, self.values, left=0.0, right=0.0)

    def _draw(self, rng, size):
        # exact inverse of the piecewise-quadratic CDF
        u = rng.uniform(0.0, 1.0, size) * self._cdf[-1]
        k = np.clip(np.searchsorted(self._cdf, u, side="right") - 1, 0, self.nodes.size - 2)
        x0, p0 = self.nodes[k], self.values[k]
        slope = (self.values[k + 1] - p0) / (self.nodes[k + 1] - x0)
        r = u - self._cdf[k]
        disc = np.sqrt(np.maximum(p0 * p0 + 2.0 * slope * r, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(p0 + disc > 0, 2.0 * r / (p0 + disc), 0.0)
        return np.clip(x0 + t, self.nodes[k], self.nodes[k + 1])

    def moments(self):
        raise NotImplementedError("analytic moments are not available for tabulated densities")

    def support(self):
        return float(self.nodes[0]), float(self.nodes[-1])

    def to_dict(self):
        return {"type": "tabulated", "nodes": self.nodes.tolist(), "values": self.values.tolist()}


@dataclass(frozen=True)
class SampleSet:
    values: np.ndarray
    seed: int
    source: dict

    def __len__(self):
        return self.values.size


def pdf_eval(dist: Distribution, x):
    """Density of ``dist`` at ``x`` (scalar in, float out; arrays broadcast)."""
    out = dist.pdf(x)
    return float(out) if np.ndim(out) == 0 else out


def sample(dist: Distribution, seed: int, m: int) -> SampleSet:
    """``m`` i.i.d. draws, deterministic in ``seed``."""
    if m < 1:
        raise ValueError(f"sample size must be >= 1, got {m}")
    values = np.asarray(dist._draw(make_rng(seed), int(m)), dtype=float)
    values.flags.writeable = False
    return SampleSet(values=values, seed=int(seed), source=dist.to_dict())


def analytic_moments(dist: Distribution) -> tuple[float, float]:
    """Closed-form (mean, variance). Tabulated densities are unsupported."""
    return dist.moments()


# type -> (required keys, optional keys)
_KEYS = {
    "uniform": (("lower", "upper"), ()),
    "gaussian": (("mean", "variance"), ()),
    "beta": (("alpha", "beta"), ("lower", "upper")),
    "tabulated": (("nodes", "values"), ()),
}


def distribution_from_dict(spec: dict) -> Distribution:
    """Build a distribution from a config descriptor such as
    ``{"type": "beta", "alpha": 1.5, "beta": 3.5, "lower": 50, "upper": 80}``."""
    spec = dict(spec)
    kind = spec.pop("type", None)
    if kind not in _KEYS:
        raise ValueError(f"unknown distribution type {kind!r}; expected one of {sorted(_KEYS)}")
    required, optional = _KEYS[kind]
    missing = [k for k in required if k not in spec]
    if missing:
        raise ValueError(f"{kind} distribution missing {missing}")
    extra = set(spec) - set(required) - set(optional)
    if extra:
        raise ValueError(f"{kind} distribution has unknown keys {sorted(extra)}")
    if kind == "uniform":
        return Uniform(float(spec["lower"]), float(spec["upper"]))
    if kind == "gaussian":
        return Gaussian(float(spec["mean"]), float(spec["variance"]))
    if kind == "beta":
        return ScaledBeta(float(spec["alpha"]), float(spec["beta"]),
                          float(spec.get("lower", 0.0)), float(spec.get("upper", 1.0)))
    return Tabulated(np.asarray(spec["nodes"], dtype=float), np.asarray(spec["values"], dtype=float))
