"""Soliton spectra of box potentials under small random perturbations (NLS and KdV)."""

__version__ = "0.1.0"

from .core import (BoxPotential, CountMismatchError, CriticalConfigurationError,  # noqa: E402
                   InvalidInputError, JostState, SchrodingerState, SolitonNoiseError,
                   SpectralPoint, UnderResolvedError)
from .kdv import kdv_find_eigenvalues  # noqa: E402
from .nls import nls_find_eigenvalues  # noqa: E402
from .processes import NoiseSpec, PathGrid, sample_brownian, sample_telegraph  # noqa: E402

__all__ = [
    "BoxPotential", "CountMismatchError", "CriticalConfigurationError", "InvalidInputError",
    "JostState", "NoiseSpec", "PathGrid", "SchrodingerState", "SolitonNoiseError",
    "SpectralPoint", "UnderResolvedError", "kdv_find_eigenvalues", "nls_find_eigenvalues",
    "sample_brownian", "sample_telegraph",
]
