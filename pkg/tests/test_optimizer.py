import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from densmatch.densities import Uniform
from densmatch.models import CallableModel, ExampleShift, LinearShift
from densmatch.optimizer import (ComputationError, DensityMatchProblem, OptimizerConfig, OverlapWarning,
                                 final_distance, minimize, project_box, run_density_match)
from densmatch.quadrature import trapezoid_grid


def quadratic(center):
    c = np.asarray(center, dtype=float)
    return lambda s: (float(np.sum((s - c) ** 2)), 2 * (s - c))


def test_project_box_examples():
    b = (np.array([0.0, 0.0]), np.array([1.0, 1.0]))
    np.testing.assert_array_equal(project_box([1.5, -0.2], b), [1.0, 0.0])
    np.testing.assert_array_equal(project_box([0.3, 0.7], b), [0.3, 0.7])


@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3))
def test_projection_idempotent_and_feasible(x):
    b = (np.array([-1.0, 0.0, 2.0]), np.array([1.0, 0.5, 3.0]))
    p = project_box(x, b)
    assert np.all(p >= b[0]) and np.all(p <= b[1])
    np.testing.assert_array_equal(project_box(p, b), p)


def test_unconstrained_quadratic():
    rep = minimize(quadratic([1.0]), [0.2], ([0.01], [2.0]))
    assert rep.final_design[0] == pytest.approx(1.0, abs=1e-8)
    assert rep.termination in ("gradient tolerance", "step tolerance")


def test_active_bound():
    rep = minimize(quadratic([3.0, -1.0]), [0.5, 0.5], ([0.0, 0.0], [2.0, 2.0]))
    np.testing.assert_allclose(rep.final_design, [2.0, 0.0], atol=1e-10)


def test_badly_scaled_box():
    lo, hi = np.array([-0.009, -0.0007]), np.array([0.009, 0.0007])
    c = np.array([0.004, -0.0003])
    fun = lambda s: (float(np.sum(((s - c) / hi) ** 2)), 2 * (s - c) / hi**2)
    rep = minimize(fun, [0.0, 0.0], (lo, hi))
    np.testing.assert_allclose(rep.final_design, c, rtol=1e-6)
    assert rep.evaluations < 20


def test_accepted_iterates_decrease_and_stay_feasible():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((5, 5))
    H = A @ A.T + np.eye(5)
    c = rng.standard_normal(5)
    fun = lambda s: (float(0.5 * s @ H @ s - c @ s), H @ s - c)
    lo, hi = -0.3 * np.ones(5), 0.3 * np.ones(5)
    rep = minimize(fun, np.zeros(5), (lo, hi))
    vals = [r.objective for r in rep.records]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    for r in rep.records:
        assert np.all(r.design >= lo) and np.all(r.design <= hi)


def test_rejects_infeasible_start():
    with pytest.raises(ValueError):
        minimize(quadratic([0.0]), [3.0], ([0.0], [1.0]))


@pytest.mark.parametrize("kw", [dict(max_iterations=-1), dict(gradient_tolerance=0.0), dict(armijo=1.5),
                                dict(backtrack=1.0), dict(initial_step=0.0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        OptimizerConfig(**kw)


def test_failure_carries_stage_and_design():
    def fun(s):
        if s[0] > 0.5:
            raise FloatingPointError("boom")
        return quadratic([1.0])(s)
    with pytest.raises(ComputationError) as info:
        minimize(fun, [0.4], ([0.0], [1.0]), stage="stage2")
    err = info.value
    assert err.stage == "stage2" and err.design[0] > 0.5
    assert "boom" in str(err) and len(err.report.records) >= 1


def test_failure_inside_driver_reports_stage():
    m = CallableModel(lambda s, w: s[0] + w if s[0] < 0.6 else np.full_like(w, np.nan),
                      lambda s, w: np.ones((np.size(w), 1)), [0.0], [1.0], Uniform(0, 1))
    prob = DensityMatchProblem(m, Uniform(1.5, 2.5), trapezoid_grid(-1, 4, 500), s0=[0.1],
                               m_samples=2000, stage1_bandwidth=1.0, stage2_bandwidth=0.1)
    with pytest.raises(ComputationError) as info:
        run_density_match(prob)
    assert info.value.stage in ("stage1", "stage2")
    assert info.value.report.termination == "computation failure"


def test_analytic_linear_shift_optimum():
    prob = DensityMatchProblem(LinearShift(), Uniform(3, 4), trapezoid_grid(0, 7, 10_000), s0=[1.0],
                               response_pdf="analytic")
    rep = run_density_match(prob)
    assert rep.final_design[0] == pytest.approx(0.3467, abs=1e-3)
    assert final_distance(rep, prob.grid, normalized=True) == pytest.approx(0.016022, abs=2e-4)


def _kde_problem(seed, m=20_000, n=1000):
    return DensityMatchProblem(LinearShift(), Uniform(3, 4), trapezoid_grid(0, 7, n), s0=[1.0],
                               m_samples=m, seed=seed)


def test_two_stage_run_is_monotone_and_deterministic():
    a, b = run_density_match(_kde_problem(4)), run_density_match(_kde_problem(4))
    assert a.is_monotone()
    assert a.stages[0] == "stage1" and a.stages[1] == "stage2"
    assert np.array_equal(a.final_design, b.final_design) and a.final_objective == b.final_objective
    assert [r.objective for r in a.records] == [r.objective for r in b.records]
    assert a.final_design[0] == pytest.approx(0.3467, abs=0.01)


def test_seeds_give_near_identical_objectives():
    d = [final_distance(run_density_match(_kde_problem(k)), trapezoid_grid(0, 7, 1000), normalized=True)
         for k in range(4)]
    assert max(d) - min(d) < 5e-3


def test_lost_overlap_is_reported():
    prob = DensityMatchProblem(ExampleShift(), Uniform(2, 3), trapezoid_grid(-1, 4, 2001), s0=[0.0],
                               m_samples=10_000, stage1_iterations=0, stage2_bandwidth=0.05)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rep = run_density_match(prob)
    assert any(issubclass(w.category, OverlapWarning) for w in caught)
    assert rep.final_design[0] == 0.0
    assert any("stage-1 bandwidth" in d for d in rep.diagnostics)


def test_unknown_response_pdf_rejected():
    prob = _kde_problem(0)
    prob.response_pdf = "histogram"
    with pytest.raises(ValueError):
        run_density_match(prob)
