"""Response models: evaluate ``f(s, omega)`` and ``grad_s f(s, omega)``.

The optimiser only talks to a model through :meth:`ResponseModel.evaluate`
and :meth:`ResponseModel.gradient`, both vectorised over ``omega``. Any
simulation code can be plugged in through :class:`CallableModel`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .densities import Distribution, Gaussian, ScaledBeta, Uniform


class DomainError(ValueError):
    """Design outside the box, or omega outside a surrogate's fit domain."""


class ResponseModel:
    """Base class for ``f(s, omega)`` with a scalar uncertain parameter.

    Subclasses set ``name``, ``lower``/``upper`` (design box),
    ``uncertainty`` and ``response_bounds``, and implement ``_f``/``_grad``.
    """

    name = "abstract"
    lower: np.ndarray
    upper: np.ndarray
    uncertainty: Distribution
    response_bounds: tuple[float, float] | None = None

    @property
    def n(self) -> int:
        return self.lower.size

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.lower, self.upper

    def check_design(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float).reshape(-1)
        if s.size != self.n:
            raise DomainError(f"{self.name}: design has {s.size} components, expected {self.n}")
        tol = 1e-12 * np.maximum(1.0, np.abs(self.upper - self.lower))
        bad = np.nonzero((s < self.lower - tol) | (s > self.upper + tol))[0]
        if bad.size:
            k = bad[0]
            raise DomainError(
                f"{self.name}: design component {k} = {s[k]} outside [{self.lower[k]}, {self.upper[k]}]"
            )
        return s

    def check_omega(self, omega) -> np.ndarray:
        return np.asarray(omega, dtype=float)

    def evaluate(self, s, omega) -> np.ndarray:
        s = self.check_design(s)
        return self._f(s, self.check_omega(omega))

    def gradient(self, s, omega) -> np.ndarray:
        """Array of shape ``omega.shape + (n,)``."""
        s = self.check_design(s)
        return self._grad(s, self.check_omega(omega))

    def _f(self, s, omega):
        raise NotImplementedError

    def _grad(self, s, omega):
        raise NotImplementedError


def eval_response(model: ResponseModel, s, omega: float) -> float:
    return float(model.evaluate(s, omega))


def grad_response(model: ResponseModel, s, omega: float) -> np.ndarray:
    return np.asarray(model.gradient(s, omega), dtype=float).reshape(model.n)


def _box(lower, upper):
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    if lower.shape != upper.shape or np.any(lower > upper):
        raise ValueError("design bounds need matching shapes with lower <= upper")
    return lower, upper


class LinearShift(ResponseModel):
    """``f = s * omega + 3.5`` with standard normal omega.

    The response is N(3.5, s**2), so the exact density and its design
    derivative are available for the analytic objective.
    """

    name = "linear-shift"

    def __init__(self, lower=0.01, upper=2.0, uncertainty: Distribution | None = None):
        self.lower, self.upper = _box(lower, upper)
        if self.n != 1:
            raise ValueError("linear-shift has a single design variable")
        self.uncertainty = uncertainty or Gaussian(0.0, 1.0)
        self.response_bounds = None

    def _f(self, s, omega):
        return s[0] * omega + 3.5

    def _grad(self, s, omega):
        return np.asarray(omega, dtype=float)[..., None] * np.ones(1)

    def response_pdf(self, s, x):
        sd = float(np.asarray(s).reshape(-1)[0])
        z = (np.asarray(x, dtype=float) - 3.5) / sd
        return np.exp(-0.5 * z * z) / (math.sqrt(2.0 * math.pi) * sd)

    def response_pdf_gradient(self, s, x):
        """d q_s(x) / d s, shape ``x.shape + (1,)``."""
        sd = float(np.asarray(s).reshape(-1)[0])
        q = self.response_pdf(s, x)
        z2 = ((np.asarray(x, dtype=float) - 3.5) / sd) ** 2
        return (q * (z2 - 1.0) / sd)[..., None]


class ExampleShift(ResponseModel):
    """``f = s + omega`` with omega ~ U[0, 1] and s in [0, 2]."""

    name = "example-shift"

    def __init__(self, lower=0.0, upper=2.0, uncertainty: Distribution | None = None):
        self.lower, self.upper = _box(lower, upper)
        if self.n != 1:
            raise ValueError("example-shift has a single design variable")
        self.uncertainty = uncertainty or Uniform(0.0, 1.0)
        lo, hi = self.uncertainty.support()
        self.response_bounds = (float(self.lower[0] + lo), float(self.upper[0] + hi))

    def _f(self, s, omega):
        return s[0] + omega

    def _grad(self, s, omega):
        return np.ones(np.shape(omega) + (1,))

    def response_pdf(self, s, x):
        s0 = float(np.asarray(s).reshape(-1)[0])
        return Uniform(s0, s0 + 1.0).pdf(x)


# Hicks-Henne bump amplitudes (fraction of chord); upper surface then lower.
BUMP_AMPLITUDES = np.array([0.0007, 0.0030, 0.0090, 0.0090, 0.0090, 0.0060, 0.0030, 0.0007] * 2)


class SyntheticAirfoil(ResponseModel):
    """Smooth analytic stand-in for a lift-to-drag response.

    With ``u = s / amplitude`` (so ``u`` lies in [-1, 1]^16) and the
    normalised Mach number ``w = (omega - 0.675) / 0.015``::

        f = c0 + a.u + w * (b0 + b.u) - w**2 * (1 + u.Q.u)

    ``Q`` is diagonal. ``a`` moves the mean, ``b`` adds symmetric spread, and
    the quadratic term adds negatively skewed spread, so designs with equal
    mean and variance can differ in skewness. Over the box and Mach support
    the response stays inside [-100, 150].
    """

    name = "synthetic-airfoil"
    c0 = 27.2356
    b0 = 6.0893
    a = np.array([1.0, 3.0, 6.0, 6.0, 6.0, 4.5, 3.0, 1.0,
                  1.0, 2.5, 5.0, 5.0, 5.0, 3.5, 2.0, 1.0])
    b = np.array([0.2, 0.5, 1.0, 1.0, 1.0, 0.8, 0.5, 0.2,
                  0.5, 1.0, 2.5, 2.5, 2.5, 2.0, 1.0, 0.5])
    q = np.array([0.6, 1.2, 2.4, 2.4, 2.4, 1.8, 1.2, 0.6,
                  0.2, 0.4, 0.8, 0.8, 0.8, 0.6, 0.4, 0.2])
    mach_center = 0.675
    mach_halfwidth = 0.015

    def __init__(self, uncertainty: Distribution | None = None):
        self.amplitude = BUMP_AMPLITUDES.copy()
        self.lower, self.upper = -self.amplitude, self.amplitude.copy()
        self.uncertainty = uncertainty or ScaledBeta(2.0, 2.0, 0.66, 0.69)
        self.response_bounds = (-100.0, 150.0)

    def _w(self, omega):
        return (np.asarray(omega, dtype=float) - self.mach_center) / self.mach_halfwidth

    def _f(self, s, omega):
        u = s / self.amplitude
        w = self._w(omega)
        spread = self.b0 + self.b @ u
        curv = 1.0 + u @ (self.q * u)
        return self.c0 + self.a @ u + w * spread - w * w * curv

    def _grad(self, s, omega):
        u = s / self.amplitude
        w = self._w(omega)[..., None]
        du = self.a + w * self.b - w * w * (2.0 * self.q * u)
        return du / self.amplitude

    def nominal_moments(self, s) -> tuple[float, float]:
        """Exact mean and variance under the beta(2, 2) Mach law."""
        u = np.asarray(s, dtype=float) / self.amplitude
        spread = self.b0 + self.b @ u
        curv = 1.0 + u @ (self.q * u)
        # w on [-1, 1] with density 3/4 (1 - w^2): E w^2 = 1/5, E w^4 = 3/35
        mean = self.c0 + self.a @ u - curv / 5.0
        var = spread**2 / 5.0 + curv**2 * (3.0 / 35.0 - 1.0 / 25.0)
        return float(mean), float(var)


class CallableModel(ResponseModel):
    """Wrap user functions ``f(s, omega)`` and ``grad(s, omega)``.

    Both must accept an array of omegas; ``grad`` returns ``(len(omega), n)``.
    """

    def __init__(self, f, grad, lower, upper, uncertainty: Distribution,
                 response_bounds=None, name="callable"):
        self.lower, self.upper = _box(lower, upper)
        self._fn, self._gradfn = f, grad
        self.uncertainty = uncertainty
        self.response_bounds = response_bounds
        self.name = name

    def _f(self, s, omega):
        return np.asarray(self._fn(s, omega), dtype=float)

    def _grad(self, s, omega):
        return np.asarray(self._gradfn(s, omega), dtype=float).reshape(np.shape(omega) + (self.n,))


# --- polynomial response surfaces in omega -------------------------------


@dataclass(frozen=True, eq=False)
class PolySurrogate:
    """Least-squares polynomial in omega, stored in the monomial basis of the
    fit domain rescaled to [-1, 1]. ``coefficients`` has shape ``(d+1,)`` or
    ``(d+1, k)`` when ``k`` quantities are fit together."""

    degree: int
    coefficients: np.ndarray
    lower: float
    upper: float
    residual: np.ndarray | float

    def _x(self, omega, strict=True):
        omega = np.asarray(omega, dtype=float)
        if strict:
            tol = 1e-12 * (self.upper - self.lower)
            if np.any(omega < self.lower - tol) or np.any(omega > self.upper + tol):
                bad = omega[(omega < self.lower - tol) | (omega > self.upper + tol)].ravel()[0]
                raise DomainError(
                    f"omega = {bad} outside surrogate fit domain [{self.lower}, {self.upper}]; "
                    "refit over a wider domain or validate before extrapolating"
                )
        return (2.0 * omega - (self.lower + self.upper)) / (self.upper - self.lower)

    def __call__(self, omega, strict: bool = True):
        x = self._x(omega, strict)
        c = self.coefficients
        V = np.vander(x.ravel(), self.degree + 1, increasing=True)
        return (V @ c).reshape(x.shape + c.shape[1:])

    def save(self, path) -> None:
        c = np.atleast_2d(self.coefficients.T).T
        res = np.atleast_1d(self.residual)
        lines = [
            f"degree {self.degree}",
            f"domain {self.lower!r} {self.upper!r}",
            f"quantities {c.shape[1]}",
            "residual " + " ".join(repr(float(r)) for r in res),
            "coefficients",
        ]
        lines += [" ".join(repr(float(v)) for v in row) for row in c]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "PolySurrogate":
        lines = Path(path).read_text().split("\n")
        degree = int(lines[0].split()[1])
        lo, hi = (float(v) for v in lines[1].split()[1:3])
        k = int(lines[2].split()[1])
        res = np.array([float(v) for v in lines[3].split()[1:]])
        rows = [[float(v) for v in ln.split()] for ln in lines[5:5 + degree + 1]]
        coef = np.array(rows)
        if k == 1:
            return cls(degree, coef[:, 0], lo, hi, float(res[0]))
        return cls(degree, coef, lo, hi, res)


def fit_surrogate(omegas, values, degree: int) -> PolySurrogate:
    """Least-squares degree-``d`` polynomial through ``(omegas, values)``.

    ``values`` may be 2-D ``(P, k)`` to fit several quantities at once.
    """
    omegas = np.asarray(omegas, dtype=float).ravel()
    values = np.asarray(values, dtype=float)
    if degree < 0:
        raise ValueError("degree must be >= 0")
    if values.shape[0] != omegas.size:
        raise ValueError("omegas and values disagree in length")
    if np.unique(omegas).size <= degree:
        raise ValueError(
            f"rank-deficient fit: {np.unique(omegas).size} distinct omegas for degree {degree}"
        )
    lo, hi = float(omegas.min()), float(omegas.max())
    x = (2.0 * omegas - (lo + hi)) / (hi - lo)
    V = np.vander(x, degree + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(V, values, rcond=None)
    resid = values - V @ coef
    rms = np.sqrt(np.mean(resid**2, axis=0))
    return PolySurrogate(int(degree), coef, lo, hi, float(rms) if np.ndim(rms) == 0 else rms)


def fit_points(dist: Distribution, p: int) -> np.ndarray:
    lo, hi = dist.domain()
    return np.linspace(lo, hi, p)


class DesignSurrogate(ResponseModel):
    """Surrogate of ``base`` at one fixed design: one polynomial in omega for
    ``f`` and one per gradient component."""

    def __init__(self, base: ResponseModel, s, p: int = 21, degree: int = 5):
        self.base = base
        self.design = base.check_design(s).copy()
        self.lower, self.upper = base.lower, base.upper
        self.uncertainty = base.uncertainty
        self.response_bounds = base.response_bounds
        self.name = f"surrogate({base.name})"
        self.nodes = fit_points(base.uncertainty, p)
        data = np.column_stack([base.evaluate(self.design, self.nodes),
                                base.gradient(self.design, self.nodes)])
        self.poly = fit_surrogate(self.nodes, data, degree)
        # split once so evaluating f does not drag the n gradient columns along
        c, res = self.poly.coefficients, np.atleast_1d(self.poly.residual)
        self._value = replace(self.poly, coefficients=c[:, 0], residual=float(res[0]))
        self._slopes = replace(self.poly, coefficients=c[:, 1:], residual=res[1:])

    @property
    def residual(self) -> float:
        return float(np.atleast_1d(self.poly.residual)[0])

    def check_design(self, s):
        s = super().check_design(s)
        if not np.array_equal(s, self.design):
            raise DomainError("a design surrogate only answers at the design it was fit at")
        return s

    def _f(self, s, omega):
        return self._value(omega)

    def _grad(self, s, omega):
        return self._slopes(omega)


def surrogate_model(base: ResponseModel, s, p: int = 21, degree: int = 5) -> DesignSurrogate:
    return DesignSurrogate(base, s, p, degree)


class RefittingSurrogate(ResponseModel):
    """Surrogate-backed model usable at any design: every new design gets a
    fresh ``p``-point fit of ``base``. The most recent fit is cached."""

    def __init__(self, base: ResponseModel, p: int = 21, degree: int = 5):
        self.base = base
        self.p, self.degree = int(p), int(degree)
        self.lower, self.upper = base.lower, base.upper
        self.uncertainty = base.uncertainty
        self.response_bounds = base.response_bounds
        self.name = f"surrogate({base.name})"
        self.fits = 0
        self._cache: DesignSurrogate | None = None

    def at(self, s) -> DesignSurrogate:
        s = self.check_design(s)
        if self._cache is None or not np.array_equal(self._cache.design, s):
            self._cache = DesignSurrogate(self.base, s, self.p, self.degree)
            self.fits += 1
        return self._cache

    def _f(self, s, omega):
        return self.at(s)._f(s, omega)

    def _grad(self, s, omega):
        return self.at(s)._grad(s, omega)


def validate_surrogate(base: ResponseModel, s, p: int = 21, degree: int = 5, holdout: int = 5):
    """Fit at ``s`` and compare against ``base`` at held-out omegas.

    Returns ``(surrogate, value_error, gradient_error)`` with relative
    max-norm errors over the held-out points.
    """
    sur = surrogate_model(base, s, p, degree)
    lo, hi = sur.nodes[0], sur.nodes[-1]
    # midway between fit nodes, spread over the domain
    step = (hi - lo) / (p - 1)
    idx = np.linspace(0, p - 2, holdout).round().astype(int)
    w = lo + (idx + 0.5) * step
    f_true = base.evaluate(sur.design, w)
    g_true = base.gradient(sur.design, w)
    f_err = np.max(np.abs(sur._f(sur.design, w) - f_true)) / max(np.max(np.abs(f_true)), 1e-300)
    g_err = np.max(np.abs(sur._grad(sur.design, w) - g_true)) / max(np.max(np.abs(g_true)), 1e-300)
    return sur, float(f_err), float(g_err)


MODELS = {
    "linear-shift": LinearShift,
    "example-shift": ExampleShift,
    "synthetic-airfoil": SyntheticAirfoil,
}
