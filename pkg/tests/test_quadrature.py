import numpy as np
import pytest
from scipy import stats
from hypothesis import given
from hypothesis import strategies as st

from densmatch.densities import Gaussian, ScaledBeta, Uniform
from densmatch.quadrature import integrate, trapezoid_grid


def test_three_point_rule():
    g = trapezoid_grid(0, 1, 3)
    np.testing.assert_array_equal(g.nodes, [0, 0.5, 1])
    np.testing.assert_array_equal(g.weights, [0.25, 0.5, 0.25])


def test_two_point_rule():
    np.testing.assert_array_equal(trapezoid_grid(0, 1, 2).weights, [0.5, 0.5])


def test_table_grid_weight_sum():
    g = trapezoid_grid(-100, 150, 2500)
    assert g.weights.sum() == pytest.approx(250.0, rel=1e-13)
    assert g.nodes[0] == -100 and g.nodes[-1] == 150


@pytest.mark.parametrize("n", [1, 0, -3])
def test_rejects_too_few_points(n):
    with pytest.raises(ValueError, match="n_points must be >= 2"):
        trapezoid_grid(0, 1, n)


def test_rejects_inverted_bounds():
    with pytest.raises(ValueError):
        trapezoid_grid(1, 0, 10)


def test_integrate_hand_sum():
    assert integrate(trapezoid_grid(0, 1, 3), [0, 1, 0]) == 0.5


def test_integrate_length_mismatch():
    with pytest.raises(ValueError):
        integrate(trapezoid_grid(0, 1, 3), [1, 2])


def test_uniform_pdf_integrates_to_one():
    g = trapezoid_grid(0, 10, 100_000)
    assert integrate(g, Uniform(3, 4).pdf(g.nodes)) == pytest.approx(1.0, abs=1e-4)


@given(st.floats(-1e3, 1e3), st.floats(1e-3, 1e3), st.integers(2, 5000))
def test_weights_sum_to_length(lo, width, n):
    g = trapezoid_grid(lo, lo + width, n)
    assert integrate(g, np.ones(n)) == pytest.approx(width, rel=1e-12)
    assert np.all(np.diff(g.nodes) > 0)
    assert np.all(g.weights > 0)


@given(st.permutations(list(range(7))))
def test_integral_invariant_under_permutation(perm):
    g = trapezoid_grid(0, 3, 7)
    vals = np.sin(g.nodes) + 2
    perm = np.array(perm)
    assert np.dot(vals[perm], g.weights[perm]) == pytest.approx(integrate(g, vals), rel=1e-14)


def test_second_order_convergence():
    # window [3.3, 4.2] keeps the endpoint derivatives away from zero, so the
    # leading Euler-Maclaurin term is the Delta**2 one
    d = Gaussian(3.5, 0.12**2)
    exact = stats.norm.cdf(4.2, 3.5, 0.12) - stats.norm.cdf(3.3, 3.5, 0.12)
    errs = []
    for n in (11, 21, 41, 81, 161):
        g = trapezoid_grid(3.3, 4.2, n)
        errs.append(abs(integrate(g, d.pdf(g.nodes)) - exact))
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all((ratios > 3.5) & (ratios < 4.5)), ratios


def test_full_support_gaussian_is_spectrally_accurate():
    # on [0, 7] the pdf and all its derivatives vanish at both ends, so the
    # trapezoid error collapses to round-off long before any Delta**2 regime
    d = Gaussian(3.5, 0.12**2)
    g = trapezoid_grid(0, 7, 129)
    assert abs(integrate(g, d.pdf(g.nodes)) - 1.0) < 1e-14


@pytest.mark.parametrize("target", [Uniform(40, 60), Gaussian(50, 10), ScaledBeta(1.5, 3.5, 50, 80)])
def test_targets_integrate_on_table_grid(target):
    g = trapezoid_grid(-100, 150, 2500)
    assert abs(integrate(g, target.pdf(g.nodes)) - 1.0) < 1e-3
