import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from densmatch.densities import (Gaussian, ScaledBeta, Tabulated, Uniform, analytic_moments,
                                 derive_seed, distribution_from_dict, pdf_eval, sample)
from densmatch.quadrature import integrate, trapezoid_grid

# mpmath, 30 digits: 1 / (sqrt(2 pi) * 0.3467)
GAUSS_PEAK_03467 = 1.15068439688904723951527562715


def test_uniform_pdf_values():
    u = Uniform(3, 4)
    assert pdf_eval(u, 3.5) == 1.0
    assert pdf_eval(u, 2.9) == 0.0
    assert pdf_eval(u, 4.1) == 0.0


def test_gaussian_peak_matches_oracle():
    g = Gaussian(3.5, 0.3467**2)
    assert pdf_eval(g, 3.5) == pytest.approx(GAUSS_PEAK_03467, rel=1e-12)


def test_scaled_beta_moments_exact():
    # reference target: mean 59.0, variance 31.5
    b = ScaledBeta(1.5, 3.5, 50, 80)
    mean, var = analytic_moments(b)
    assert mean == pytest.approx(59.0, abs=1e-12)
    assert var == pytest.approx(31.5, abs=1e-12)


def test_analytic_moments_uniform_and_gaussian():
    assert analytic_moments(Uniform(3, 4)) == pytest.approx((3.5, 1 / 12))
    assert analytic_moments(Gaussian(50, 10)) == (50, 10)


def test_tabulated_moments_unsupported():
    t = Tabulated(np.array([0.0, 1.0, 2.0]), np.array([0.0, 1.0, 0.0]))
    with pytest.raises(NotImplementedError):
        analytic_moments(t)


@pytest.mark.parametrize("bad", [
    lambda: Uniform(4, 3),
    lambda: Uniform(1, 1),
    lambda: Gaussian(0, 0),
    lambda: Gaussian(0, -1),
    lambda: ScaledBeta(0, 1),
    lambda: ScaledBeta(1, -2),
    lambda: ScaledBeta(1, 1, 2, 2),
    lambda: Tabulated(np.array([0.0]), np.array([1.0])),
    lambda: Tabulated(np.array([0.0, 1.0]), np.array([-1.0, 1.0])),
])
def test_invalid_parameters_rejected_at_construction(bad):
    with pytest.raises(ValueError):
        bad()


def test_tabulated_renormalised_to_unit_trapezoid_mass():
    nodes = np.linspace(0, 2, 41)
    t = Tabulated(nodes, 3.0 * np.exp(-nodes))
    mass = np.sum(0.5 * (t.values[1:] + t.values[:-1]) * np.diff(nodes))
    assert mass == pytest.approx(1.0, abs=1e-12)


def test_beta_sample_mean_near_midpoint():
    b = ScaledBeta(2, 2, 0.66, 0.69)
    x = sample(b, 7, 100_000).values
    se = np.sqrt(b.moments()[1] / x.size)
    assert abs(x.mean() - 0.675) < 3 * se


def test_gaussian_sample_variance():
    x = sample(Gaussian(0, 1), 11, 1_000_000).values
    assert abs(x.var() - 1.0) < 0.01


@pytest.mark.parametrize("dist", [
    Uniform(3, 4), Gaussian(50, 10), ScaledBeta(1.5, 3.5, 50, 80),
    Tabulated(np.array([0.0, 1.0, 3.0]), np.array([1.0, 2.0, 0.5])),
])
def test_sampling_is_deterministic(dist):
    a, b = sample(dist, 123, 1000), sample(dist, 123, 1000)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, sample(dist, 124, 1000).values)
    assert len(a) == 1000 and a.seed == 123


def test_sample_rejects_empty():
    with pytest.raises(ValueError):
        sample(Uniform(0, 1), 0, 0)


def test_derived_seeds_differ_per_stage():
    assert derive_seed(0, 1) != derive_seed(0, 2)
    assert derive_seed(5, 1) == derive_seed(5, 1)


@pytest.mark.parametrize("dist", [Uniform(3, 4), ScaledBeta(1.5, 3.5, 50, 80), ScaledBeta(2, 2, 0.66, 0.69),
                                  Tabulated(np.array([-1.0, 0.0, 2.0]), np.array([0.0, 1.0, 0.0]))])
def test_bounded_pdfs_integrate_to_one(dist):
    lo, hi = dist.support()
    grid = trapezoid_grid(lo, hi, 100_000)
    assert integrate(grid, dist.pdf(grid.nodes)) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("dist", [Uniform(3, 4), Gaussian(50, 10), ScaledBeta(1.5, 3.5, 50, 80)])
def test_sample_moments_within_five_standard_errors(dist):
    x = sample(dist, 2024, 1_000_000).values
    mean, var = dist.moments()
    m = x.size
    assert abs(x.mean() - mean) < 5 * np.sqrt(var / m)
    # var of the sample variance ~ (mu4 - var^2) / m
    mu4 = np.mean((x - mean) ** 4)
    assert abs(x.var() - var) < 5 * np.sqrt((mu4 - var**2) / m)


def test_tabulated_sampling_follows_table():
    # triangle on [0, 2]: mean 1, variance 1/6
    t = Tabulated(np.array([0.0, 1.0, 2.0]), np.array([0.0, 1.0, 0.0]))
    x = sample(t, 3, 400_000).values
    assert x.min() >= 0 and x.max() <= 2
    assert abs(x.mean() - 1.0) < 5 * np.sqrt(1 / 6 / x.size)
    assert x.var() == pytest.approx(1 / 6, rel=0.01)


@given(st.floats(-50, 50), st.floats(0.01, 20), st.floats(-100, 100))
def test_uniform_pdf_nonnegative_and_zero_outside(a, width, x):
    u = Uniform(a, a + width)
    p = pdf_eval(u, x)
    assert p >= 0
    if x < a or x > a + width:
        assert p == 0


@given(st.floats(0.2, 10), st.floats(0.2, 10), st.floats(-2, 3))
@settings(max_examples=50)
def test_beta_pdf_zero_outside_support(alpha, beta, x):
    b = ScaledBeta(alpha, beta, 0.0, 1.0)
    p = pdf_eval(b, x)
    assert p >= 0
    if x < 0 or x > 1:
        assert p == 0


@pytest.mark.parametrize("spec, expected", [
    ({"type": "uniform", "lower": 3, "upper": 4}, Uniform(3, 4)),
    ({"type": "gaussian", "mean": 50, "variance": 10}, Gaussian(50, 10)),
    ({"type": "beta", "alpha": 1.5, "beta": 3.5, "lower": 50, "upper": 80}, ScaledBeta(1.5, 3.5, 50, 80)),
    ({"type": "beta", "alpha": 2, "beta": 2}, ScaledBeta(2, 2)),
])
def test_distribution_from_dict(spec, expected):
    d = distribution_from_dict(spec)
    assert d == expected
    assert distribution_from_dict(d.to_dict()) == expected


@pytest.mark.parametrize("spec", [
    {"type": "cauchy"},
    {"type": "uniform", "lower": 3},
    {"type": "gaussian", "mean": 0, "variance": 1, "sd": 1},
])
def test_distribution_from_dict_rejects(spec):
    with pytest.raises(ValueError):
        distribution_from_dict(spec)
