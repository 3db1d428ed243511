"""Monte Carlo and analytic strength statistics of softening fishnets."""

__version__ = "0.1.0"

from .strength import StrengthDistribution, make_generator, sample_strengths
from .mesh import FishnetTopology, build_topology
from .solver import (
    BudgetExhaustedError,
    DegenerateLoadError,
    SeparationError,
    SimulationRecord,
    run_simulation,
)
from .order_stats import OrderStatBasis, weibull_scale
from .polya_aeppli import FitError, PolyaAeppli, fit_moments, fit_sample
from .tail import (
    NoDefaultError,
    TailModel,
    failure_probability,
    gamma_default,
    strength_at_probability,
    table1_defaults,
)
from .ensemble import EnsembleConfig, EnsembleResult, estimate_gamma, run_ensemble

__all__ = [
    "__version__",
    "StrengthDistribution",
    "make_generator",
    "sample_strengths",
    "FishnetTopology",
    "build_topology",
    "BudgetExhaustedError",
    "DegenerateLoadError",
    "SeparationError",
    "SimulationRecord",
    "run_simulation",
    "OrderStatBasis",
    "weibull_scale",
    "FitError",
    "PolyaAeppli",
    "fit_moments",
    "fit_sample",
    "NoDefaultError",
    "TailModel",
    "failure_probability",
    "gamma_default",
    "strength_at_probability",
    "table1_defaults",
    "EnsembleConfig",
    "EnsembleResult",
    "estimate_gamma",
    "run_ensemble",
]
