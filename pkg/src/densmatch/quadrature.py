"""Trapezoid quadrature on the response interval [f_lower, f_upper]."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    nodes: np.ndarray
    weights: np.ndarray
    lower: float
    upper: float

    def __post_init__(self):
        if self.nodes.size < 2 or self.nodes.shape != self.weights.shape:
            raise ValueError("grid needs >= 2 nodes with matching weights")
        if np.any(np.diff(self.nodes) <= 0):
            raise ValueError("grid nodes must be strictly increasing")

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def spacing(self) -> float:
        return (self.upper - self.lower) / (self.n - 1)

    @property
    def length(self) -> float:
        return self.upper - self.lower


def trapezoid_grid(f_lower: float, f_upper: float, n: int) -> QuadratureGrid:
    """Uniform ``n``-point trapezoid rule on ``[f_lower, f_upper]``."""
    if int(n) != n or n < 2:
        raise ValueError(f"grid.n_points must be >= 2, got {n}")
    if not f_lower < f_upper:
        raise ValueError(f"grid bounds must satisfy f_lower < f_upper, got [{f_lower}, {f_upper}]")
    n = int(n)
    nodes = np.linspace(f_lower, f_upper, n)
    delta = (f_upper - f_lower) / (n - 1)
    weights = np.full(n, delta)
    weights[0] = weights[-1] = 0.5 * delta
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return QuadratureGrid(nodes=nodes, weights=weights, lower=float(f_lower), upper=float(f_upper))


def integrate(grid: QuadratureGrid, values) -> float:
    values = np.asarray(values, dtype=float)
    if values.shape != grid.nodes.shape:
        raise ValueError(f"expected {grid.n} values, got shape {values.shape}")
    return float(values @ grid.weights)
