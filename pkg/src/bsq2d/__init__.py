"""Spectral solvers and dispersive-estimate experiments for two-dimensional
Boussinesq systems in the long-wave regime."""
from .spectral import Grid2D, SpectralField, forward_transform, inverse_transform, sobolev_norm
from .models import ABCDParams, KDV_KDV, ModelClass, classify, dispersion, hamiltonian, validate
from .diagonal import DiagonalState, PhysicalState, from_diagonal, to_diagonal
from .evolution import (
    BlowUpError,
    Scheme,
    SolverConfig,
    Trajectory,
    simulate_1d,
    simulate_kdvkdv,
    simulate_physical,
)
from .estimates import EstimateReport

__version__ = "0.1.0"

__all__ = [
    "Grid2D",
    "SpectralField",
    "forward_transform",
    "inverse_transform",
    "sobolev_norm",
    "ABCDParams",
    "KDV_KDV",
    "ModelClass",
    "classify",
    "dispersion",
    "hamiltonian",
    "validate",
    "DiagonalState",
    "PhysicalState",
    "from_diagonal",
    "to_diagonal",
    "BlowUpError",
    "Scheme",
    "SolverConfig",
    "Trajectory",
    "simulate_1d",
    "simulate_kdvkdv",
    "simulate_physical",
    "EstimateReport",
    "__version__",
]
