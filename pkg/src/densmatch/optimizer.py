"""Box-constrained descent and the two-stage bandwidth driver."""
from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .densities import Distribution, derive_seed, sample
from .kde import scott_from_samples
from .models import ResponseModel
from .objective import AnalyticObjective, KDEObjective, ObjectiveEvaluation, distance_hat
from .quadrature import QuadratureGrid

log = logging.getLogger(__name__)


class OverlapWarning(UserWarning):
    """Target and response estimate share no numerical support."""


class ComputationError(RuntimeError):
    """An objective evaluation failed. Carries the stage, the iteration it
    failed in and the records accepted so far."""

    def __init__(self, stage: str, iteration: int, design, cause: BaseException, report=None):
        self.stage, self.iteration = stage, iteration
        self.design = np.array(design, dtype=float)
        self.report = report
        super().__init__(f"stage {stage or '-'}, iteration {iteration}, design {self.design.tolist()}: "
                         f"{type(cause).__name__}: {cause}")


@dataclass(frozen=True)
class OptimizerConfig:
    max_iterations: int = 200
    gradient_tolerance: float = 1e-8
    step_tolerance: float = 1e-10
    armijo: float = 1e-4
    backtrack: float = 0.5
    initial_step: float = 0.1
    max_backtracks: int = 50

    def __post_init__(self):
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if not (self.gradient_tolerance > 0 and self.step_tolerance > 0):
            raise ValueError("tolerances must be positive")
        if not 0 < self.armijo < 1:
            raise ValueError("armijo constant must lie in (0, 1)")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtracking factor must lie in (0, 1)")
        if not self.initial_step > 0:
            raise ValueError("initial_step must be positive")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    stage: str
    design: np.ndarray
    objective: float
    grad_norm: float
    step: float
    bandwidth: float


@dataclass
class RunReport:
    records: list[IterationRecord] = field(default_factory=list)
    termination: str = ""
    final: ObjectiveEvaluation | None = None
    nodes: np.ndarray | None = None
    wall_time: float = 0.0
    evaluations: int = 0
    diagnostics: list[str] = field(default_factory=list)

    @property
    def final_design(self) -> np.ndarray:
        return self.records[-1].design

    @property
    def final_objective(self) -> float:
        return self.records[-1].objective

    @property
    def stages(self) -> list[str]:
        return list(dict.fromkeys(r.stage for r in self.records))

    def stage_records(self, stage: str) -> list[IterationRecord]:
        return [r for r in self.records if r.stage == stage]

    def is_monotone(self) -> bool:
        """Objective never increases within a stage."""
        for st in self.stages:
            vals = [r.objective for r in self.stage_records(st)]
            if any(b > a for a, b in zip(vals, vals[1:])):
                return False
        return True

    def extend(self, other: "RunReport") -> None:
        self.records += other.records
        self.termination = other.termination
        self.final = other.final
        self.nodes = other.nodes if other.nodes is not None else self.nodes
        self.evaluations += other.evaluations
        self.diagnostics += other.diagnostics


def project_box(s, bounds) -> np.ndarray:
    lower, upper = bounds
    return np.minimum(np.maximum(np.asarray(s, dtype=float), lower), upper)


def _projected_gradient(s, g, lower, upper):
    pg = g.copy()
    pg[(s <= lower) & (g > 0)] = 0.0
    pg[(s >= upper) & (g < 0)] = 0.0
    return pg


def _box_scale(bounds) -> np.ndarray:
    lower, upper = (np.asarray(b, dtype=float).reshape(-1) for b in bounds)
    finite = np.isfinite(lower) & np.isfinite(upper) & (upper > lower)
    return np.where(finite, upper - lower, 1.0)


def minimize(fun, s0, bounds, cfg: OptimizerConfig | None = None,
             stage: str = "", bandwidth: float = float("nan")) -> RunReport:
    """Projected gradient descent with Barzilai-Borwein trial steps and
    Armijo backtracking. ``fun(s)`` returns ``(value, gradient)`` (an
    :class:`ObjectiveEvaluation` also works).

    Iterates live in unit-box coordinates when the bounds are finite, so
    badly scaled boxes do not slow the method down. Every accepted iterate
    strictly decreases the objective.
    """
    cfg = cfg or OptimizerConfig()
    t_start = time.perf_counter()
    lower, upper = (np.asarray(b, dtype=float).reshape(-1) for b in bounds)
    s = np.asarray(s0, dtype=float).reshape(-1)
    if s.shape != lower.shape:
        raise ValueError("initial design and bounds disagree in dimension")
    if np.any(s < lower) or np.any(s > upper):
        raise ValueError("initial design lies outside the box")
    scale = _box_scale((lower, upper))

    report = RunReport()
    evals = 0

    def call(x):
        nonlocal evals
        evals += 1
        try:
            out = fun(x)
        except Exception as exc:
            report.evaluations = evals
            raise ComputationError(stage, len(report.records), x, exc, report) from exc
        val, grad = out
        return float(val), np.asarray(grad, dtype=float).reshape(-1), out

    f, g, last = call(s)
    pg = _projected_gradient(s, g, lower, upper)
    report.records.append(IterationRecord(0, stage, s.copy(), f, float(np.linalg.norm(pg)), 0.0, bandwidth))
    alpha = cfg.initial_step / max(np.max(np.abs(g * scale)), 1e-300)
    reason = "max iterations"

    for it in range(1, cfg.max_iterations + 1):
        if np.linalg.norm(pg) < cfg.gradient_tolerance:
            reason = "gradient tolerance"
            break
        gz = g * scale
        d = (project_box(s - alpha * gz * scale, (lower, upper)) - s) / scale
        slope = float(gz @ d)
        if not slope < 0:
            reason = "gradient tolerance"
            break
        lam = 1.0
        for _ in range(cfg.max_backtracks):
            if lam * np.max(np.abs(d)) < cfg.step_tolerance:
                break
            s_new = project_box(s + lam * d * scale, (lower, upper))
            f_new, g_new, out_new = call(s_new)
            if f_new < f and f_new <= f + cfg.armijo * lam * slope:
                break
            # minimiser of the quadratic through f, slope and f_new, kept
            # inside [lam / 10, backtrack * lam]
            curv = f_new - f - lam * slope
            trial = -slope * lam * lam / (2.0 * curv) if curv > 0 else cfg.backtrack * lam
            lam = min(max(trial, 0.1 * lam), cfg.backtrack * lam)
        else:
            reason = "line-search stall"
            break
        if lam * np.max(np.abs(d)) < cfg.step_tolerance:
            reason = "step tolerance"
            break
        dz = (s_new - s) / scale
        dy = (g_new - g) * scale
        sy = float(dz @ dy)
        alpha = float(np.clip(dz @ dz / sy, 1e-12, 1e12)) if sy > 0 else 1e12
        s, f, g, last = s_new, f_new, g_new, out_new
        pg = _projected_gradient(s, g, lower, upper)
        step = float(np.linalg.norm(dz * scale))
        report.records.append(IterationRecord(it, stage, s.copy(), f, float(np.linalg.norm(pg)), step, bandwidth))
        if np.max(np.abs(dz)) < cfg.step_tolerance:
            reason = "step tolerance"
            break
    else:
        if np.linalg.norm(pg) < cfg.gradient_tolerance:
            reason = "gradient tolerance"

    report.termination = reason
    report.final = last if isinstance(last, ObjectiveEvaluation) else None
    report.evaluations = evals
    report.wall_time = time.perf_counter() - t_start
    return report


# --- two-stage density matching ------------------------------------------


@dataclass
class DensityMatchProblem:
    """Everything needed for one density-matching run.

    ``stage1_bandwidth=None`` means ``(f_upper - f_lower) / 5``;
    ``stage2_bandwidth="scott"`` applies Scott's rule to the responses and
    re-applies it at the converged design until the bandwidth settles.
    ``response_pdf="analytic"`` uses the model's exact density instead of a
    kernel estimate (single stage, no bandwidth).
    """

    model: ResponseModel
    target: Distribution
    grid: QuadratureGrid
    s0: np.ndarray | None = None
    m_samples: int = 100_000
    seed: int = 0
    stage1_bandwidth: float | None = None
    stage1_iterations: int = 3
    stage2_bandwidth: float | str = "scott"
    response_pdf: str = "kde"
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    scott_rounds: int = 6
    scott_tolerance: float = 1e-3

    def initial_design(self) -> np.ndarray:
        if self.s0 is None:
            return 0.5 * (self.model.lower + self.model.upper)
        return self.model.check_design(self.s0).copy()


def _overlap_lost(ev: ObjectiveEvaluation, grid: QuadratureGrid) -> bool:
    w = grid.weights
    t, q = ev.target_trace, ev.response_trace
    cross = float(t @ (w * q))
    scale = np.sqrt(float(t @ (w * t)) * float(q @ (w * q)))
    return cross <= 1e-12 * scale


def _stage(objective, s, bounds, cfg, label, report: RunReport, grid) -> np.ndarray:
    try:
        part = minimize(objective, s, bounds, cfg, stage=label, bandwidth=objective.bandwidth)
    except ComputationError as exc:
        if exc.report is not None:
            report.extend(exc.report)
        report.termination = "computation failure"
        exc.report = report
        raise
    first = part.records[0]
    if first.grad_norm < cfg.gradient_tolerance and len(part.records) == 1:
        ev = objective(first.design)
        if _overlap_lost(ev, grid):
            msg = (f"{label}: gradient vanishes at the initial design and the response estimate "
                   f"(h={objective.bandwidth:g}) does not overlap the target; "
                   "increase the stage-1 bandwidth")
            part.diagnostics.append(msg)
            warnings.warn(msg, OverlapWarning, stacklevel=3)
    log.info("%s: %s after %d iterations, objective %.6g", label, part.termination,
             len(part.records) - 1, part.final_objective)
    report.extend(part)
    return part.final_design


def run_density_match(problem: DensityMatchProblem) -> RunReport:
    t_start = time.perf_counter()
    model, grid, cfg = problem.model, problem.grid, problem.optimizer
    bounds = model.bounds
    s = problem.initial_design()
    report = RunReport(nodes=grid.nodes)

    if problem.response_pdf == "analytic":
        _stage(AnalyticObjective(model, problem.target, grid), s, bounds, cfg, "analytic", report, grid)
    elif problem.response_pdf == "kde":
        if problem.stage1_iterations > 0:
            h1 = problem.stage1_bandwidth or grid.length / 5.0
            omegas = sample(model.uncertainty, derive_seed(problem.seed, 1), problem.m_samples)
            obj = KDEObjective(model, problem.target, grid, omegas, h1)
            s = _stage(obj, s, bounds, replace(cfg, max_iterations=problem.stage1_iterations),
                       "stage1", report, grid)
        omegas = sample(model.uncertainty, derive_seed(problem.seed, 2), problem.m_samples)
        if problem.stage2_bandwidth == "scott":
            # Fixed point h = Scott(s*(h)). Rounds whose bandwidth is about to
            # change only need a rough minimiser; the last one is solved fully.
            base = KDEObjective(model, problem.target, grid, omegas, 1.0)
            h = scott_from_samples(base.responses(s))
            tight = False
            for rnd in range(1, problem.scott_rounds + 1):
                label = "stage2" if rnd == 1 else f"stage2.{rnd}"
                obj = base.with_bandwidth(h)
                tight = tight or rnd == problem.scott_rounds
                round_cfg = cfg
                if not tight:
                    g_start = float(np.linalg.norm(obj(s).gradient))  # cached for the solver
                    round_cfg = replace(cfg, gradient_tolerance=max(cfg.gradient_tolerance, 1e-2 * g_start))
                s_prev = s
                s = _stage(obj, s, bounds, round_cfg, label, report, grid)
                # the next round's minimiser is about as far away as this one moved
                moved = float(np.max(np.abs(s - s_prev) / _box_scale(bounds)))
                cfg = replace(cfg, initial_step=max(2.0 * moved, 1e-6))
                if tight:
                    break
                h_new = scott_from_samples(base.responses(s))
                tight = abs(h_new - h) <= problem.scott_tolerance * h
                h = h_new
        else:
            h2 = float(problem.stage2_bandwidth)
            obj = KDEObjective(model, problem.target, grid, omegas, h2)
            _stage(obj, s, bounds, cfg, "stage2", report, grid)
    else:
        raise ValueError(f"response_pdf must be 'kde' or 'analytic', got {problem.response_pdf!r}")

    report.nodes = grid.nodes
    report.wall_time = time.perf_counter() - t_start
    return report


def final_distance(report: RunReport, grid: QuadratureGrid, normalized: bool = False) -> float:
    ev = report.final
    d = distance_hat(ev.target_trace, ev.response_trace, grid)
    return d / grid.length if normalized else d
