"""Density matching for optimization under uncertainty.

Find designs whose response density is close, in squared L2 distance, to a
target density. The response density is estimated by Gaussian kernel density
estimation over frozen Monte Carlo samples. A mean-variance NSGA-II baseline
is included for comparison.
"""

__version__ = "0.1.0"

from .densities import (Gaussian, SampleSet, ScaledBeta, Tabulated, Uniform, analytic_moments,
                        distribution_from_dict, make_rng, pdf_eval, sample)
from .kde import build_matrices, estimate_on_grid, kernel_eval, scott_bandwidth
from .models import (ExampleShift, LinearShift, PolySurrogate, SyntheticAirfoil, eval_response,
                     fit_surrogate, grad_response, surrogate_model)
from .objective import AnalyticObjective, KDEObjective, distance_hat, gradient_hat, normalized_distance
from .optimizer import (DensityMatchProblem, OptimizerConfig, final_distance, minimize, project_box,
                        run_density_match)
from .quadrature import QuadratureGrid, integrate, trapezoid_grid
from .rdo import NSGA2Config, nondominated_sort, nsga2_run, rdo_objectives, sample_moments

__all__ = [
    "AnalyticObjective", "DensityMatchProblem", "ExampleShift", "Gaussian", "KDEObjective",
    "LinearShift", "NSGA2Config", "OptimizerConfig", "PolySurrogate", "QuadratureGrid",
    "SampleSet", "ScaledBeta", "SyntheticAirfoil", "Tabulated", "Uniform", "analytic_moments",
    "build_matrices", "distance_hat", "distribution_from_dict", "estimate_on_grid",
    "eval_response", "final_distance", "fit_surrogate", "grad_response", "gradient_hat", "integrate",
    "kernel_eval", "make_rng", "minimize", "nondominated_sort", "normalized_distance", "nsga2_run", "pdf_eval",
    "project_box", "rdo_objectives", "run_density_match", "sample", "sample_moments",
    "scott_bandwidth", "surrogate_model", "trapezoid_grid",
]
