"""Shared value types, error classes and small numerical helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

ArrayLike = Union[float, complex, np.ndarray]

#: tolerance used to decide that a box sits exactly on a soliton-creation threshold
CRITICAL_TOL = 1e-8


class SolitonNoiseError(ValueError):
    """Base class for rejected inputs."""


class InvalidInputError(SolitonNoiseError):
    pass


class CriticalConfigurationError(SolitonNoiseError):
    """The requested operation is undefined at (or away from) a critical point."""


class UnderResolvedError(SolitonNoiseError):
    """A grid is too coarse for the requested computation."""


class CountMismatchError(RuntimeError):
    """Root scan and closed-form count disagree even after refinement."""

    def __init__(self, message: str, diagnostics: Optional[dict] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class BoxPotential:
    """Deterministic background ``q * 1_[0, R](x)``."""

    q: float
    R: float

    def __post_init__(self):
        if not (math.isfinite(self.q) and math.isfinite(self.R)):
            raise InvalidInputError(f"non-finite box parameters q={self.q}, R={self.R}")
        if self.R <= 0:
            raise InvalidInputError(f"box width must be positive, got R={self.R}")
        if self.q < 0:
            raise InvalidInputError(f"negative box height q={self.q} is not supported")

    @property
    def area(self) -> float:
        return self.q * self.R


@dataclass(frozen=True)
class SpectralPoint:
    """Point ``zeta = xi + i*eta`` of the closed upper half-plane."""

    xi: float
    eta: float

    def __post_init__(self):
        if self.eta < 0:
            raise InvalidInputError(f"spectral points live in the upper half-plane, eta={self.eta}")

    @property
    def zeta(self) -> complex:
        return complex(self.xi, self.eta)

    @classmethod
    def from_complex(cls, zeta: complex) -> "SpectralPoint":
        return cls(float(np.real(zeta)), float(np.imag(zeta)))


@dataclass(frozen=True)
class JostState:
    """Values ``(psi1, psi2)`` of the Zakharov-Shabat flow (scalars or per-path arrays)."""

    psi1: ArrayLike
    psi2: ArrayLike

    def as_array(self) -> np.ndarray:
        return np.stack([np.asarray(self.psi1), np.asarray(self.psi2)])


@dataclass(frozen=True)
class SchrodingerState:
    """Values ``(phi, phi_x)`` of the Schrodinger flow (scalars or per-path arrays)."""

    phi: ArrayLike
    phi_x: ArrayLike

    def as_array(self) -> np.ndarray:
        return np.stack([np.asarray(self.phi), np.asarray(self.phi_x)])


def as_spectral_point(zeta) -> SpectralPoint:
    if isinstance(zeta, SpectralPoint):
        return zeta
    return SpectralPoint.from_complex(complex(zeta))


def sin_over(c, x):
    """``sin(c*x)/c`` with the removable singularity at ``c = 0`` filled in.

    Even in ``c``, so the square-root branch used to build ``c`` does not matter.
    """
    return x * np.sinc(np.asarray(c) * x / np.pi)


def nls_critical_index(pot: BoxPotential, tol: float = CRITICAL_TOL) -> Optional[int]:
    """Return ``n`` when ``qR = (2n+1)pi/2`` within ``tol``, else ``None``."""
    n = round(pot.area / math.pi - 0.5)
    if n >= 0 and abs(pot.area - (2 * n + 1) * math.pi / 2) <= tol:
        return int(n)
    return None


def kdv_critical_index(pot: BoxPotential, tol: float = CRITICAL_TOL) -> Optional[int]:
    """Return ``n`` when ``sqrt(q) R = n pi`` within ``tol`` (``n = 0`` means ``q = 0``)."""
    s = math.sqrt(pot.q) * pot.R
    n = round(s / math.pi)
    if abs(s - n * math.pi) <= tol:
        return int(n)
    return None
