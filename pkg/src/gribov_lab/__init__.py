"""Truncated Fock-basis laboratory for the regularized Gribov operator."""

from .errors import (
    ConvergenceError,
    DefectiveSpectrumError,
    GribovLabError,
    ParameterError,
    PoleProximityError,
)
from .fock_ops import (
    FockMatrix,
    GribovParams,
    Truncation,
    build_diag_power,
    build_hamiltonian,
    build_interaction,
    build_ladder,
    restrict_subspace,
)
from .linalg import (
    SchattenReport,
    SpectralData,
    eigen,
    matrix_exp,
    resolvent_diag,
    schatten_norm,
    singular_values,
)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "DefectiveSpectrumError",
    "FockMatrix",
    "GribovLabError",
    "GribovParams",
    "ParameterError",
    "PoleProximityError",
    "SchattenReport",
    "SpectralData",
    "Truncation",
    "build_diag_power",
    "build_hamiltonian",
    "build_interaction",
    "build_ladder",
    "eigen",
    "matrix_exp",
    "resolvent_diag",
    "restrict_subspace",
    "schatten_norm",
    "singular_values",
]
