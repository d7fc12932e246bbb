"""Gaussian kernel density estimates on a quadrature grid.

Two routes compute the same quantities:

* :func:`build_matrices` forms the dense ``N x M`` matrices ``K`` and ``K'``.
  Exact, simple, and memory-bound; used for small problems and as a check.
* :func:`estimate_on_grid` / :func:`kernel_adjoint` are matrix-free and
  exploit the uniform grid: each sample only touches nodes within
  ``CUTOFF * h`` of it. Beyond that radius the kernel is below 1e-17 of its
  peak, i.e. under one ulp of any sum it enters.

The matrix-free routines pick between two exact evaluations. The direct one
walks each sample's window. The binned one snaps sample ``f_j`` to its
nearest node ``c_j`` with offset ``eps_j`` and expands the cross term::

    exp(-(m*D - eps)**2 / 2h**2)
        = G(m) * exp(-eps**2 / 2h**2) * sum_p (m*D/h)**p (eps/h)**p / p!

with ``G(m) = exp(-(m*D)**2 / 2h**2)``. Truncating the series once its terms
drop below 1e-17 leaves ``P`` convolutions of per-node moment arrays, so the
cost is ``O(M P + N W P)`` rather than ``O(M W)`` for a window of ``W`` nodes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy import signal

from .quadrature import QuadratureGrid

SQRT_2PI = math.sqrt(2.0 * math.pi)
CUTOFF = 9.0


def kernel_eval(r, h: float):
    """Normalised Gaussian kernel and its derivative with respect to ``r``."""
    if not h > 0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    r = np.asarray(r, dtype=float)
    value = np.exp(-0.5 * (r / h) ** 2) / (h * SQRT_2PI)
    deriv = -value * r / (h * h)
    if value.ndim == 0:
        return float(value), float(deriv)
    return value, deriv


def scott_bandwidth(m: int, sigma: float) -> float:
    """Scott's rule ``(4 / (3 m))**(1/5) * sigma``."""
    if m < 1:
        raise ValueError(f"sample count must be >= 1, got {m}")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    return (4.0 / (3.0 * m)) ** 0.2 * sigma


def scott_from_samples(samples) -> float:
    """Scott's rule with sigma estimated by the sample standard deviation."""
    samples = np.asarray(samples, dtype=float)
    sigma = float(np.std(samples, ddof=1)) if samples.size > 1 else 0.0
    if not sigma > 0:
        raise ValueError("cannot apply Scott's rule to zero-variance samples")
    return scott_bandwidth(samples.size, sigma)


@dataclass(frozen=True, eq=False)
class KernelMatrices:
    K: np.ndarray
    Kprime: np.ndarray
    bandwidth: float
    sample_values: np.ndarray

    @property
    def estimate(self) -> np.ndarray:
        """``K e``: the density estimate at the grid nodes."""
        return self.K.sum(axis=1)


def build_matrices(samples, h: float, grid: QuadratureGrid) -> KernelMatrices:
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size < 1:
        raise ValueError("need at least one sample")
    r = grid.nodes[:, None] - samples[None, :]
    value, deriv = kernel_eval(r, h)
    m = samples.size
    return KernelMatrices(K=value / m, Kprime=deriv / m, bandwidth=float(h), sample_values=samples)


@numba.njit(cache=True)
def _window(f, reach, lower, delta, n):
    lo = int(math.ceil((f - reach - lower) / delta))
    hi = int(math.floor((f + reach - lower) / delta))
    if lo < 0:
        lo = 0
    if hi > n - 1:
        hi = n - 1
    return lo, hi


@numba.njit(cache=True)
def _accumulate(samples, h, lower, delta, n, v, density, adjoint):
    # Along a uniform grid the Gaussian obeys an exact ratio recurrence:
    # e[i+1] = e[i] * a[i], a[i+1] = a[i] * b. Re-anchor with exp() every
    # BLOCK nodes so round-off stays ~BLOCK**2 ulps.
    BLOCK = 32
    reach = CUTOFF * h
    inv2h2 = 0.5 / (h * h)
    b = math.exp(-delta * delta / (h * h))
    for j in range(samples.size):
        f = samples[j]
        lo, hi = _window(f, reach, lower, delta, n)
        acc = 0.0
        i = lo
        while i <= hi:
            stop = min(i + BLOCK, hi + 1)
            r = lower + i * delta - f
            e = math.exp(-r * r * inv2h2)
            a = math.exp(-(2.0 * r * delta + delta * delta) * inv2h2)
            for k in range(i, stop):
                if density is not None:
                    density[k] += e
                else:
                    acc += v[k] * (lower + k * delta - f) * e
                e *= a
                a *= b
            i = stop
        if adjoint is not None:
            adjoint[j] = acc


MAX_TERMS = 20


def _plan(h, grid):
    """``(W, P)`` for the binned evaluation, or None when the direct walk is
    the better (or only sensible) choice."""
    delta = grid.spacing
    W = int(math.ceil(CUTOFF * h / delta)) + 1
    if W > 4 * grid.n:
        return None
    x = W * delta * 0.5 * delta / (h * h)  # largest |m D eps| / h**2
    term, P = 1.0, 0
    while term * math.exp(x) > 1e-17:
        P += 1
        term *= x / P
        if P > MAX_TERMS:
            return None
    return W, max(P, 1)


def _bins(samples, h, grid, W):
    c = np.rint((samples - grid.lower) / grid.spacing)
    keep = (c >= -W) & (c <= grid.n - 1 + W)
    c = c[keep].astype(np.int64)
    eps = (samples[keep] - (grid.lower + c * grid.spacing)) / h
    return keep, c + W, eps


def _taylor_kernels(h, delta, W, P):
    m = np.arange(-W, W + 1) * (delta / h)
    H = np.empty((P, m.size))
    H[0] = np.exp(-0.5 * m * m)
    for p in range(1, P):
        H[p] = H[p - 1] * m
    return H, m * h  # kernels and the offsets m*D


def _density_binned(samples, h, grid, W, P):
    _, idx, eps = _bins(samples, h, grid, W)
    L = grid.n + 2 * W
    H, _ = _taylor_kernels(h, grid.spacing, W, P)
    term = np.exp(-0.5 * eps * eps)
    out = np.zeros(grid.n)
    for p in range(P):
        mu = np.bincount(idx, weights=term, minlength=L)
        out += signal.convolve(mu, H[p])[2 * W:2 * W + grid.n]
        term = term * eps / (p + 1)
    return np.maximum(out, 0.0)


def _adjoint_binned(samples, h, grid, v, W, P):
    keep, idx, eps = _bins(samples, h, grid, W)
    H, offs = _taylor_kernels(h, grid.spacing, W, P)
    # A_p[c] = sum_m v[c+m] m D H_p(m), B_p[c] = sum_m v[c+m] H_p(m)
    A = [signal.convolve(v, (offs * H[p])[::-1]) for p in range(P)]
    B = [signal.convolve(v, H[p][::-1]) for p in range(P)]
    epsr = eps * h
    acc = A[P - 1][idx] - epsr * B[P - 1][idx]
    for p in range(P - 2, -1, -1):
        acc = A[p][idx] - epsr * B[p][idx] + acc * (eps / (p + 1))
    out = np.zeros(samples.size)
    out[keep] = acc * np.exp(-0.5 * eps * eps)
    return out


def _density(samples, h, grid):
    plan = _plan(h, grid)
    if plan is not None:
        out = _density_binned(samples, h, grid, *plan)
    else:
        out = np.zeros(grid.n)
        _accumulate(samples, h, grid.lower, grid.spacing, grid.n, out, out, None)
    return out / (samples.size * h * SQRT_2PI)


def _adjoint(samples, h, grid, v):
    plan = _plan(h, grid)
    if plan is not None:
        out = _adjoint_binned(samples, h, grid, v, *plan)
    else:
        out = np.empty(samples.size)
        _accumulate(samples, h, grid.lower, grid.spacing, grid.n, v, None, out)
    return out * (-1.0 / (samples.size * h**3 * SQRT_2PI))


def _check(samples, h):
    if not h > 0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    samples = np.ascontiguousarray(samples, dtype=float).ravel()
    if samples.size < 1:
        raise ValueError("need at least one sample")
    if not np.all(np.isfinite(samples)):
        raise ValueError("samples must be finite")
    return samples


def estimate_on_grid(samples, h: float, grid: QuadratureGrid) -> np.ndarray:
    """Density estimate ``K e`` at the grid nodes, without forming ``K``."""
    samples = _check(samples, h)
    return _density(samples, float(h), grid)


def kernel_adjoint(samples, h: float, grid: QuadratureGrid, v) -> np.ndarray:
    """``K'^T v`` (length M) without forming ``K'``."""
    samples = _check(samples, h)
    v = np.ascontiguousarray(v, dtype=float)
    if v.shape != grid.nodes.shape:
        raise ValueError(f"expected a length-{grid.n} vector, got shape {v.shape}")
    return _adjoint(samples, float(h), grid, v)
