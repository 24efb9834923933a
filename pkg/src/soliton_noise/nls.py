"""Zakharov-Shabat scattering for the NLS box potential.

All closed forms use ``c = sqrt(q**2 + zeta**2)`` only through ``cos(c x)`` and
``sin(c x)/c``, which are entire in ``zeta``; the principal branch is used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from .core import (BoxPotential, CountMismatchError, CriticalConfigurationError,
                   InvalidInputError, JostState, UnderResolvedError, as_spectral_point,
                   nls_critical_index, sin_over)

MAX_SCAN_POINTS = 2 ** 20


def _jost(q, zeta, x):
    zeta = np.asarray(zeta, dtype=complex)
    c = np.sqrt(q * q + zeta * zeta)
    s = sin_over(c, x)
    return np.cos(c * x) - 1j * zeta * s, 1j * q * s


def nls_jost_box(pot: BoxPotential, zeta, x: float) -> JostState:
    """Closed-form flow from ``Psi(0) = (1, 0)`` at position ``x`` in the box.

    At ``zeta = i q`` this returns the analytic limit ``(1 + q x, i q x)``.
    """
    if not 0.0 <= x <= pot.R:
        raise InvalidInputError(f"x={x} outside [0, R={pot.R}]")
    z = as_spectral_point(zeta).zeta
    p1, p2 = _jost(pot.q, z, x)
    return JostState(complex(p1), complex(p2))


def nls_jost_coefficient_a(pot: BoxPotential, zeta):
    """``a(zeta) = psi1(R, zeta) * exp(i zeta R)``; accepts a complex array for contour work."""
    z = zeta.zeta if hasattr(zeta, "zeta") else np.asarray(zeta, dtype=complex)
    p1, _ = _jost(pot.q, z, pot.R)
    out = p1 * np.exp(1j * z * pot.R)
    return complex(out) if np.ndim(out) == 0 else out


def _axis_condition(q, R, eta):
    c0 = np.sqrt(np.maximum(q * q - eta * eta, 0.0))
    return eta * sin_over(c0, R) + np.cos(c0 * R)


def nls_axis_condition(pot: BoxPotential, eta: float) -> float:
    """``psi1(R, i eta)``, real and pole free on ``[0, q]`` with ``g(q) = 1 + qR``."""
    if not 0.0 <= eta <= pot.q:
        raise InvalidInputError(f"eta={eta} outside [0, q={pot.q}]")
    return float(_axis_condition(pot.q, pot.R, eta))


def nls_count_formula(pot: BoxPotential) -> int:
    """Number of solitons ``floor(1/2 + qR/pi)``; the quiescent one is counted on threshold."""
    n = nls_critical_index(pot)
    if n is not None:
        return n + 1
    return int(math.floor(0.5 + pot.area / math.pi))


def nls_count_argument_principle(pot: BoxPotential, contour_radius: float,
                                 n_contour: int = 4096, max_phase_step: float = math.pi / 2,
                                 critical_margin: float = 1e-6) -> int:
    """Winding number of ``a`` along ``[-r, r]`` closed by the upper half circle of radius ``r``.

    Raises when the contour would pass through a zero (critical ``qR``) or when
    adjacent samples differ in phase by more than ``max_phase_step``.
    """
    if pot.q <= 0:
        raise InvalidInputError("argument-principle count needs q > 0")
    if contour_radius <= pot.q:
        raise InvalidInputError(
            f"contour radius {contour_radius} must exceed q={pot.q} to enclose all eigenvalues")
    if n_contour < 16:
        raise InvalidInputError("n_contour too small")
    n_odd = round(pot.area / math.pi - 0.5)
    if n_odd >= 0 and abs(pot.area - (2 * n_odd + 1) * math.pi / 2) < critical_margin:
        raise CriticalConfigurationError(
            f"qR={pot.area} is (near) an odd multiple of pi/2: a(0) vanishes on the contour; "
            "use nls_count_formula or the quiescent-soliton analysis instead")
    n_line = n_contour // 2
    n_arc = n_contour - n_line
    line = np.linspace(-contour_radius, contour_radius, n_line, endpoint=False)
    arc = contour_radius * np.exp(1j * np.linspace(0.0, math.pi, n_arc, endpoint=False))
    contour = np.concatenate([line.astype(complex), arc, [line[0] + 0j]])
    with np.errstate(over="ignore", invalid="ignore"):
        a = nls_jost_coefficient_a(pot, contour)
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(
            f"contour radius {contour_radius} overflows a(zeta) in double precision; use a smaller radius")
    steps = np.angle(a[1:] / a[:-1])
    worst = float(np.max(np.abs(steps)))
    if worst > max_phase_step:
        raise UnderResolvedError(
            f"phase of a(zeta) jumps by {worst:.3f} rad between contour samples; increase n_contour")
    return int(round(steps.sum() / (2 * math.pi)))


@dataclass(frozen=True)
class EigenvalueReport:
    """Discrete eigenvalues ``zeta = i*eta`` of the box, with the consistency checks that found them."""

    eigenvalues: Tuple[float, ...]
    count_formula: int
    count_argument_principle: Optional[int]
    residuals: Tuple[float, ...]
    quiescent: bool = False
    scan_points: int = 0

    @property
    def count(self) -> int:
        return len(self.eigenvalues) + int(self.quiescent)


def _scan_roots(fun, lo, hi, n_points, xtol):
    grid = np.linspace(lo, hi, n_points)
    vals = fun(grid)
    roots = []
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
        roots.append(brentq(fun, grid[i], grid[i + 1], xtol=xtol, rtol=4 * np.finfo(float).eps))
    # exact zeros on interior scan nodes
    for i in np.nonzero(vals[1:-1] == 0.0)[0]:
        roots.append(float(grid[i + 1]))
    return sorted(roots)


def nls_find_eigenvalues(pot: BoxPotential, tol: float = 1e-10,
                         contour_points: int = 4096) -> EigenvalueReport:
    """All eigenvalues on the imaginary axis: sign-change scan of ``g`` on ``(0, q)`` plus root polishing."""
    if pot.q <= 0:
        raise InvalidInputError("eigenvalue search needs q > 0")
    if not 0 < tol < 1e-6:
        raise InvalidInputError(f"tol must lie in (0, 1e-6), got {tol}")
    q, R = pot.q, pot.R
    expected = nls_count_formula(pot)
    quiescent = nls_critical_index(pot) is not None
    start = 1e-6 * q if quiescent else 0.0
    fun = lambda e: _axis_condition(q, R, e)  # noqa: E731
    n_points = 64 * (int(pot.area // math.pi) + 2)
    while True:
        roots = _scan_roots(fun, start, q, n_points, xtol=0.1 * tol)
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
    count_ap = None
    if not quiescent:
        radius = max(2.0 * q, q + 1.0)
        try:
            count_ap = nls_count_argument_principle(pot, radius, contour_points)
        except (CriticalConfigurationError, UnderResolvedError):
            count_ap = None
    return EigenvalueReport(tuple(roots), expected, count_ap, residuals, quiescent, n_points)
