"""Bayesian optimization with variational entropy search.

Modules
-------
special_math     digamma, log-gamma, Brent solvers, two-sample KS test
gp_model         noiseless Matern-5/2 GP with MAP hyperparameters
posterior_paths  pathwise posterior samples and their maxima
acquisition      EI/LogEI, MES, VES-Exp and VES-Gamma
acq_optimizer    multi-start maximizer on the unit cube
benchmarks       test objectives
harness          seeded runs, suites, KS study, plots
"""

from .acquisition import AcqKind, AcquisitionSpec, GammaParams, ZMoments
from .benchmarks import Benchmark, get_benchmark, make_gp_sample, make_synthetic
from .gp_model import FitConfig, GpPosterior, KernelSpec, ObservationSet, fit_map
from .harness import ExperimentConfig, RegretTrace, run_bo, run_suite
from .posterior_paths import PathBundle, draw_paths

__version__ = "0.1.0"

__all__ = [
    "AcqKind", "AcquisitionSpec", "GammaParams", "ZMoments",
    "Benchmark", "get_benchmark", "make_gp_sample", "make_synthetic",
    "FitConfig", "GpPosterior", "KernelSpec", "ObservationSet", "fit_map",
    "ExperimentConfig", "RegretTrace", "run_bo", "run_suite",
    "PathBundle", "draw_paths",
]
