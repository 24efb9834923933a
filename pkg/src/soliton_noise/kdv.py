"""Schrodinger (KdV Lax) scattering for the box potential ``q * 1_[0, R]``.

Bound states are searched on ``zeta = i*eta`` with ``0 < eta < sqrt(q)``; inside
the box ``c = sqrt(q - eta**2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .core import (BoxPotential, CountMismatchError, InvalidInputError, SchrodingerState,
                   kdv_critical_index, sin_over)
from .nls import MAX_SCAN_POINTS, _scan_roots


def _check_eta(pot: BoxPotential, eta: float) -> None:
    if not 0.0 <= eta < math.sqrt(pot.q):
        raise InvalidInputError(
            f"eta={eta} outside [0, sqrt(q)={math.sqrt(pot.q):g}); for eta >= sqrt(q) the "
            "solution is monotone and cannot be a bound state")


def _bound(q, eta, x):
    c = np.sqrt(np.maximum(q - eta * eta, 0.0))
    s = sin_over(c, x)
    cs = np.cos(c * x)
    return cs + eta * s, -(c * c) * s + eta * cs


def kdv_bound_solution(pot: BoxPotential, eta: float, x: float) -> SchrodingerState:
    """``(phi0, phi0')`` from ``(1, eta)``: ``phi0 = cos(cx) + (eta/c) sin(cx)``."""
    _check_eta(pot, eta)
    if not 0.0 <= x <= pot.R:
        raise InvalidInputError(f"x={x} outside [0, R={pot.R}]")
    phi, dphi = _bound(pot.q, eta, x)
    return SchrodingerState(float(phi), float(dphi))


def _final_condition(q, R, eta):
    c = np.sqrt(np.maximum(q - eta * eta, 0.0))
    return 2.0 * eta * np.cos(c * R) + (2.0 * eta * eta - q) * sin_over(c, R)


def kdv_final_condition(pot: BoxPotential, eta: float) -> float:
    """Decay mismatch ``F = phi_x(R) + eta*phi(R)``; zero exactly at bound states."""
    _check_eta(pot, eta)
    return float(_final_condition(pot.q, pot.R, eta))


def kdv_tan_condition(pot: BoxPotential, eta: float) -> float:
    """Tangent form ``tan(cR) - 2 eta c / (q - 2 eta**2)``; poles at ``cos(cR) = 0`` and ``eta = sqrt(q/2)``.

    Related to the pole-free form by ``c F = -(q - 2 eta**2) cos(cR) f``.
    """
    _check_eta(pot, eta)
    c = math.sqrt(pot.q - eta * eta)
    return math.tan(c * pot.R) - 2 * eta * c / (pot.q - 2 * eta * eta)


def kdv_count_formula(pot: BoxPotential) -> int:
    """``floor(R sqrt(q)/pi) + 1``; at a critical point the newest (quiescent) soliton is included."""
    if pot.q <= 0:
        raise InvalidInputError("count formula needs q > 0")
    n = kdv_critical_index(pot)
    if n is not None:
        return n + 1
    return int(math.floor(math.sqrt(pot.q) * pot.R / math.pi)) + 1


def kdv_small_q_expansion(q: float, R: float) -> float:
    """Two-term small-``q`` expansion of the single eigenvalue: ``Rq/2 - R**3 q**2 / 12``."""
    return R * q / 2.0 - R ** 3 * q ** 2 / 12.0


def kdv_soliton_mass(eta: float) -> float:
    if eta < 0:
        raise InvalidInputError("eta must be non-negative")
    return 4.0 * eta


def kdv_soliton_energy(eta: float) -> float:
    if eta < 0:
        raise InvalidInputError("eta must be non-negative")
    return 16.0 / 3.0 * eta ** 3


@dataclass(frozen=True)
class KdvEigenvalueReport:
    eigenvalues: Tuple[float, ...]
    count_formula: int
    residuals: Tuple[float, ...]
    quiescent: bool = False
    scan_points: int = 0

    @property
    def count(self) -> int:
        return len(self.eigenvalues) + int(self.quiescent)


def kdv_find_eigenvalues(pot: BoxPotential, tol: float = 1e-10) -> KdvEigenvalueReport:
    """Zeros of ``F`` on ``(0, sqrt(q))`` by sign-change scan and bracketed polishing."""
    if pot.q <= 0:
        raise InvalidInputError("eigenvalue search needs q > 0")
    if not 0 < tol < 1e-6:
        raise InvalidInputError(f"tol must lie in (0, 1e-6), got {tol}")
    q, R = pot.q, pot.R
    top = math.sqrt(q)
    expected = kdv_count_formula(pot)
    quiescent = kdv_critical_index(pot) is not None
    start = 1e-6 * top if quiescent else 0.0
    fun = lambda e: _final_condition(q, R, e)  # noqa: E731
    n_points = 64 * (expected + 2)
    while True:
        roots = [r for r in _scan_roots(fun, start, top, n_points, xtol=1e-3 * tol) if r > 0]
        if len(roots) + int(quiescent) == expected:
            break
        if 2 * n_points > MAX_SCAN_POINTS:
            raise CountMismatchError(
                f"found {len(roots)} roots (+{int(quiescent)} quiescent), formula says {expected}",
                {"roots": roots, "scan_points": n_points, "q": q, "R": R})
        n_points *= 2
    residuals = tuple(abs(float(fun(r))) for r in roots)
    if any(r > tol for r in residuals):
        raise CountMismatchError("root residual above tolerance", {"residuals": residuals})
    return KdvEigenvalueReport(tuple(roots), expected, residuals, quiescent, n_points)
