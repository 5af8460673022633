"""Bayesian optimisation of fine-tuning hyperparameters.

The package couples a Gaussian-process surrogate with an expected-improvement
acquisition rule to tune adaptation strategies over a mixed
discrete/continuous search space, alongside random-search and fixed-baseline
comparators, synthetic per-speaker objectives, and corpus utilities.
"""

from boffin.acquisition import expected_improvement, maximize
from boffin.benchmark import BenchmarkConfig, BenchmarkSummary, run_benchmark
from boffin.gp import GaussianProcess, KernelParams
from boffin.objectives import (
    ExternalObjective,
    FunctionObjective,
    Objective,
    ObjectiveFailure,
    SurrogateFamilyParams,
    make_speaker_surrogate,
    synthetic_objective,
)
from boffin.space import Configuration, ParameterSpec, SearchSpace, boffin_preset
from boffin.tuner import (
    History,
    TrialRecord,
    TunerConfig,
    run_baseline,
    run_bo,
    run_random_search,
)

__version__ = "0.1.0"

__all__ = [
    "BenchmarkConfig",
    "BenchmarkSummary",
    "Configuration",
    "ExternalObjective",
    "FunctionObjective",
    "GaussianProcess",
    "History",
    "KernelParams",
    "Objective",
    "ObjectiveFailure",
    "ParameterSpec",
    "SearchSpace",
    "SurrogateFamilyParams",
    "TrialRecord",
    "TunerConfig",
    "boffin_preset",
    "expected_improvement",
    "make_speaker_surrogate",
    "maximize",
    "run_baseline",
    "run_benchmark",
    "run_bo",
    "run_random_search",
    "synthetic_objective",
    "__version__",
]
