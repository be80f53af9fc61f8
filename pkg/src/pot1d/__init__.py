"""One-dimensional optimal transport maps by parabolic time marching."""

__version__ = "0.1.0"

from .bounds import DerivativeBounds, derive_bounds, select_dx
from .densities import CATALOG_IDS, CatalogEntry, DensitySpec, catalog, cdf, custom_entry
from .errors import ConfigError, ConvexityLossError, DomainError, Pot1dError, UnknownExampleError
from .grid_ops import Grid, build_grid
from .monitor import ConvergenceReport, StoppingRule
from .oracle import OptimalMap, invert_cdf
from .stepper import SolverState, StepConfig, run, step

__all__ = [
    "CATALOG_IDS", "CatalogEntry", "ConfigError", "ConvergenceReport", "ConvexityLossError",
    "DensitySpec", "DerivativeBounds", "DomainError", "Grid", "OptimalMap", "Pot1dError",
    "SolverState", "StepConfig", "StoppingRule", "UnknownExampleError", "build_grid",
    "catalog", "cdf", "custom_entry", "derive_bounds", "invert_cdf", "run", "select_dx", "step",
]
