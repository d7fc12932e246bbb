import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from densmatch.densities import Gaussian, Uniform, sample
from densmatch.models import CallableModel, LinearShift, SyntheticAirfoil
from densmatch.rdo import (NSGA2Config, crowding_distance, design_moments, dominates, nondominated_sort, nsga2,
                           nsga2_run, rdo_objectives, sample_moments)

# direct evaluation at the zero design, samples sample(uncertainty, 0, 10**4)
AIRFOIL_ZERO = (0.036955810790088986, 7.533317925059126)


def brute_force_fronts(P):
    # peel off the points no remaining point dominates, pair by pair
    remaining = list(range(len(P)))
    fronts = []
    while remaining:
        R = P[remaining]
        beaten = [any(np.all(R[j] <= R[i]) and np.any(R[j] < R[i]) for j in range(len(R)))
                  for i in range(len(R))]
        fronts.append([k for k, b in zip(remaining, beaten) if not b])
        remaining = [k for k, b in zip(remaining, beaten) if b]
    return fronts


def toy(x):
    return (x[0] ** 2, (x[0] - 2) ** 2), None


def toy_archive(seed=0, generations=40):
    return nsga2(toy, np.zeros(3), np.array([2.0, 1.0, 1.0]),
                 NSGA2Config(population=40, generations=generations, seed=seed))


def test_moments_of_constants():
    m = sample_moments([2.5, 2.5, 2.5])
    assert (m.mean, m.variance, m.skewness, m.count) == (2.5, 0.0, 0.0, 3)


def test_moments_hand_example():
    m = sample_moments([-1.0, 0.0, 1.0])
    assert m.mean == 0 and m.variance == pytest.approx(2 / 3) and m.skewness == 0


def test_gaussian_skewness_near_zero():
    m = sample_moments(sample(Gaussian(0, 1), 8, 10**6).values)
    assert abs(m.skewness) < 3 * np.sqrt(6 / 10**6)


def test_moments_reject_empty():
    with pytest.raises(ValueError):
        sample_moments([])


def test_linear_shift_objectives():
    om = sample(LinearShift().uncertainty, 1, 10**6)
    inv_mean, var = rdo_objectives(LinearShift(), [0.3], om)
    assert inv_mean == pytest.approx(1 / 3.5, abs=5 * 0.3 / 3.5**2 / 1e3)
    assert var == pytest.approx(0.09, abs=5 * 0.09 * np.sqrt(2 / 10**6))


def test_constant_model():
    m = CallableModel(lambda s, w: np.full_like(w, 5.0), lambda s, w: np.zeros((np.size(w), 1)),
                      [0.0], [1.0], Uniform(0, 1))
    assert rdo_objectives(m, [0.5], np.linspace(0, 1, 50)) == (0.2, 0.0)


def test_airfoil_zero_design_baseline():
    m = SyntheticAirfoil()
    out = rdo_objectives(m, np.zeros(16), sample(m.uncertainty, 0, 10**4))
    np.testing.assert_allclose(out, AIRFOIL_ZERO, rtol=1e-12)


def test_nonpositive_mean_penalized():
    m = CallableModel(lambda s, w: w - 1.0, lambda s, w: np.zeros((np.size(w), 1)), [0.0], [1.0], Uniform(0, 1))
    assert rdo_objectives(m, [0.5], np.linspace(0, 1, 11), penalty=123.0)[0] == 123.0


def test_surrogate_moments_match_direct():
    m = SyntheticAirfoil()
    om = sample(m.uncertainty, 2, 20_000)
    s = 0.3 * m.upper
    a, b = design_moments(m, s, om), design_moments(m, s, om, surrogate=(21, 5))
    assert b.mean == pytest.approx(a.mean, rel=1e-6) and b.variance == pytest.approx(a.variance, rel=1e-4)


def test_sort_hand_example():
    fronts = nondominated_sort([(1, 2), (2, 1), (3, 3), (0.5, 4)])
    assert sorted(fronts[0]) == [0, 1, 3] and fronts[1] == [2]


def test_sort_singleton_and_ties():
    assert nondominated_sort([(1.0, 1.0)]) == [[0]]
    assert nondominated_sort([(1.0, 1.0)] * 4) == [[0, 1, 2, 3]]


@given(st.integers(0, 2**32 - 1), st.integers(1, 200))
@settings(max_examples=100, deadline=None)
def test_sort_matches_brute_force(seed, n):
    rng = np.random.default_rng(seed)
    # coarse values force plenty of ties
    P = rng.integers(0, 12, (n, 2)).astype(float)
    assert [sorted(f) for f in nondominated_sort(P)] == brute_force_fronts(P)


def test_crowding_boundaries_infinite():
    d = crowding_distance(np.array([[0.0, 3.0], [1.0, 2.0], [2.0, 1.0], [3.0, 0.0]]))
    assert np.isinf(d[0]) and np.isinf(d[3])
    np.testing.assert_allclose(d[1:3], [4 / 3, 4 / 3])


def test_config_validation():
    with pytest.raises(ValueError):
        NSGA2Config(population=7)
    with pytest.raises(ValueError):
        NSGA2Config(generations=-1)


def test_toy_archive_is_pure_and_spans_front():
    arch = toy_archive()
    F = arch.objectives()
    for i in range(len(F)):
        for j in range(len(F)):
            assert not dominates(F[i], F[j])
    x = arch.designs()[:, 0]
    assert np.ptp(x) >= 0.9 * 2.0


def test_toy_elitism():
    best = toy_archive().best_history
    assert np.all(np.diff(best, axis=0) <= 0)


def test_toy_deterministic():
    a, b = toy_archive(seed=5), toy_archive(seed=5)
    assert np.array_equal(a.designs(), b.designs()) and np.array_equal(a.objectives(), b.objectives())
    assert not np.array_equal(a.designs(), toy_archive(seed=6).designs())


def test_default_mutation_rate_is_one_over_n(monkeypatch):
    import densmatch.rdo as rdo
    seen = set()
    real = rdo._poly_mutation

    def spy(rng, x, lower, upper, eta, prob):
        seen.add(prob)
        return real(rng, x, lower, upper, eta, prob)

    monkeypatch.setattr(rdo, "_poly_mutation", spy)
    m = SyntheticAirfoil()
    nsga2_run(m, m.bounds, np.array([0.675]), NSGA2Config(population=4, generations=1))
    assert seen == {0.0625}


def test_mutation_changes_about_one_gene_in_n():
    from densmatch.densities import make_rng
    from densmatch.rdo import _poly_mutation
    rng = make_rng(0)
    x = np.full(16, 0.5)
    changed = np.mean([np.sum(_poly_mutation(rng, x, np.zeros(16), np.ones(16), 20.0, 1 / 16) != x)
                       for _ in range(4000)])
    assert changed == pytest.approx(1.0, abs=0.1)


def test_airfoil_rdo_smoke():
    m = SyntheticAirfoil()
    om = sample(m.uncertainty, 3, 2000)
    arch = nsga2_run(m, m.bounds, om, NSGA2Config(population=20, generations=3, seed=0))
    assert len(arch.members) >= 1
    for mem in arch.members:
        assert np.all(mem.design >= m.lower) and np.all(mem.design <= m.upper)
        assert mem.objectives[0] == pytest.approx(1 / mem.moments.mean)
