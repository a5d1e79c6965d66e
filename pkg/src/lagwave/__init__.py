"""Axisymmetric acoustic and elastic wave modelling with a Laguerre time transform.

Each Laguerre harmonic turns the wave equation into an elliptic problem in
(r, z); those are solved one after another by Krylov methods preconditioned
with a fast separable solver, and traces are summed back into the time domain.
"""

from .driver import (
    SimulationConfig,
    error_metric,
    exact_acoustic_solution,
    run,
    run_acoustic,
    run_elastic,
)
from .grid import AcousticMedium, Constant, ElasticMedium, Layered, build_grid
from .laguerre import LaguerreBasis, forward_transform, inverse_series, source_time_function
from .operators import SourceSpec

__version__ = "0.1.0"

__all__ = [
    "SimulationConfig",
    "run",
    "run_acoustic",
    "run_elastic",
    "exact_acoustic_solution",
    "error_metric",
    "AcousticMedium",
    "ElasticMedium",
    "Constant",
    "Layered",
    "build_grid",
    "LaguerreBasis",
    "forward_transform",
    "inverse_series",
    "source_time_function",
    "SourceSpec",
]
