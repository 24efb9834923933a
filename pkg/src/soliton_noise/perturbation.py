"""First-order random corrections to soliton parameters.

Corrections follow the implicit-function recipe ``d zeta = -dF_sigma / dF_zeta``
with ``dF_sigma`` taken from the stochastic convolutions in :mod:`soliton_noise.sde`.
For the NLS problem ``F = psi1(R, zeta)`` is holomorphic, so
``d_xi = Im(dF_sigma)/alpha`` and ``d_eta = -Re(dF_sigma)/alpha`` with
``alpha = dF/d eta`` real on the imaginary axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .core import (BoxPotential, CriticalConfigurationError, InvalidInputError,
                   kdv_critical_index, nls_critical_index, sin_over)
from .kdv import _bound, _final_condition
from .nls import _axis_condition
from .processes import BrownianPath
from .sde import (integrate_kdv_first_order, integrate_nls_first_order, kdv_first_order_kernels,
                  nls_first_order_kernels)

DENOMINATOR_FLOOR = 1e-10
EIGEN_TOL = 1e-8
#: distance to a creation threshold below which regular corrections carry a warning
NEAR_CRITICAL = 1e-4


@dataclass(frozen=True)
class CorrectionResult:
    """First-order corrections ``(d xi/d sigma, d eta/d sigma)``; per path or per ensemble (arrays).

    ``created`` is set only for corrections of a quiescent (zero) eigenvalue.
    """

    d_xi: Union[float, np.ndarray]
    d_eta: Union[float, np.ndarray]
    variance_eta: float
    variance_xi: float
    denominator: float
    path_id: int = 0
    created: Optional[Union[bool, np.ndarray]] = None
    near_critical: bool = False


@dataclass(frozen=True)
class JacobianNls:
    d_xi_F: complex
    d_eta_F: complex
    det_J: float


def _check_nls_eta(pot: BoxPotential, eta0: float) -> float:
    if not 0.0 <= eta0 < pot.q:
        raise InvalidInputError(f"eta0={eta0} must lie in [0, q={pot.q})")
    return math.sqrt(pot.q ** 2 - eta0 ** 2)


def _nls_d_eta_F(q, R, eta0, c0):
    return (q * q / c0 ** 2 + R * eta0) * sin_over(c0, R) - R * eta0 ** 2 / c0 ** 2 * math.cos(c0 * R)


def nls_jacobian(pot: BoxPotential, eta0: float) -> JacobianNls:
    """Derivatives of ``F = psi1(R, zeta)`` at ``zeta = i eta0``.

    ``d_xi_F`` is ``dpsi1/dzeta`` differentiated directly; ``d_eta_F`` is
    the closed form ``[q^2/c^3 + R eta/c] sin(cR) - R eta^2/c^2 cos(cR)``.
    """
    c0 = _check_nls_eta(pot, eta0)
    q, R = pot.q, pot.R
    zeta = 1j * eta0
    s, cs = sin_over(c0, R), math.cos(c0 * R)
    d_zeta = s * (-R * zeta - 1j * q * q / c0 ** 2) - 1j * R * zeta ** 2 / c0 ** 2 * cs
    d_eta = complex(_nls_d_eta_F(q, R, eta0, c0))
    return JacobianNls(complex(d_zeta), d_eta, float(abs(d_zeta) ** 2))


def _midpoints(R: float, n: int) -> np.ndarray:
    return (np.arange(n) + 0.5) * (R / n)


def _isometry(kernel_sq: np.ndarray, R: float) -> float:
    return float(kernel_sq.sum() * R / kernel_sq.size)


def _quad_points(path: Optional[BrownianPath], default: int = 4096) -> int:
    return 4 * (path.grid.n_steps if path is not None else default // 4)


def _near_critical(index_fn, pot: BoxPotential) -> bool:
    return index_fn(pot, NEAR_CRITICAL) is not None


def _nls_denominator(pot: BoxPotential, eta0: float) -> float:
    c0 = _check_nls_eta(pot, eta0)
    alpha = _nls_d_eta_F(pot.q, pot.R, eta0, c0)
    if abs(alpha) < DENOMINATOR_FLOOR:
        raise CriticalConfigurationError(
            f"dF/deta = {alpha:.3e} at eta0={eta0}: critical configuration, use the quiescent correction")
    return alpha


def _check_nls_eigenvalue(pot: BoxPotential, eta0: float) -> None:
    res = abs(float(_axis_condition(pot.q, pot.R, eta0)))
    if res > EIGEN_TOL:
        raise InvalidInputError(f"eta0={eta0} is not an eigenvalue (|psi1(R)| = {res:.2e})")


def nls_variances(pot: BoxPotential, eta0: float, n_quad: int = 4096, alpha: float = 0.5,
                  complex_noise: bool = False):
    """Ito-isometry variances ``(var_eta, var_xi)`` of the NLS corrections."""
    den = _nls_denominator(pot, eta0)
    y = _midpoints(pot.R, n_quad)
    k1, k2 = nls_first_order_kernels(pot, eta0, y, alpha)
    var_eta = _isometry(k1[0].real ** 2, pot.R)
    var_xi = _isometry(k1[0].imag ** 2, pot.R)
    if complex_noise:
        var_eta += _isometry(k2[0].real ** 2, pot.R)
        var_xi += _isometry(k2[0].imag ** 2, pot.R)
    return var_eta / den ** 2, var_xi / den ** 2


def nls_eta_correction(pot: BoxPotential, eta0: float, path: BrownianPath, alpha: float = 0.5,
                       path_id: int = 0) -> CorrectionResult:
    """Amplitude correction under real white noise; the velocity correction is zero."""
    _check_nls_eigenvalue(pot, eta0)
    den = _nls_denominator(pot, eta0)
    dF = integrate_nls_first_order(pot, eta0, path, alpha=alpha).psi1
    d_eta = -np.real(dF) / den
    var_eta, _ = nls_variances(pot, eta0, _quad_points(path), alpha)
    d_xi = np.zeros_like(d_eta) if np.ndim(d_eta) else 0.0
    return CorrectionResult(d_xi, d_eta if np.ndim(d_eta) else float(d_eta), var_eta, 0.0, den,
                            path_id, near_critical=_near_critical(nls_critical_index, pot))


def nls_complex_corrections(pot: BoxPotential, eta0: float, path1: BrownianPath,
                            path2: BrownianPath, alpha: float = 0.5,
                            path_id: int = 0) -> CorrectionResult:
    """Velocity and amplitude corrections under ``U = q + sigma (W1' + i W2')``."""
    _check_nls_eigenvalue(pot, eta0)
    den = _nls_denominator(pot, eta0)
    dF = integrate_nls_first_order(pot, eta0, path1, path2, alpha=alpha).psi1
    d_eta, d_xi = -np.real(dF) / den, np.imag(dF) / den
    var_eta, var_xi = nls_variances(pot, eta0, _quad_points(path1), alpha, complex_noise=True)
    if np.ndim(d_eta) == 0:
        d_eta, d_xi = float(d_eta), float(d_xi)
    return CorrectionResult(d_xi, d_eta, var_eta, var_xi, den, path_id,
                            near_critical=_near_critical(nls_critical_index, pot))


def _require_nls_critical(pot: BoxPotential) -> int:
    n = nls_critical_index(pot)
    if n is None:
        raise CriticalConfigurationError(
            f"qR={pot.area} is not an odd multiple of pi/2 (tolerance 1e-8)")
    return n


def nls_quiescent_correction(pot: BoxPotential, path: BrownianPath, alpha: float = 0.5,
                             path_id: int = 0) -> CorrectionResult:
    """Zero eigenvalue at ``qR = (2n+1) pi/2``: ``d_eta = q W_R``, a soliton appears iff ``W_R > 0``."""
    _require_nls_critical(pot)
    amp = math.sqrt(2.0 * alpha)
    d_eta = pot.q * amp * path.terminal
    den = math.sin(pot.area) / pot.q
    d_eta = d_eta if np.ndim(d_eta) else float(d_eta)
    return CorrectionResult(np.zeros_like(d_eta) if np.ndim(d_eta) else 0.0, d_eta,
                            pot.q ** 2 * pot.R * amp ** 2, 0.0, den, path_id,
                            created=np.asarray(d_eta) > 0 if np.ndim(d_eta) else bool(d_eta > 0))


def _cell_integral(Q, R: float):
    """``int_0^R Q dx`` for per-cell values ``Q`` (last axis) or a Brownian path (``Q dx = dW``)."""
    if isinstance(Q, BrownianPath):
        if not math.isclose(Q.grid.x_max, R, rel_tol=1e-12):
            raise InvalidInputError("process grid does not cover [0, R]")
        return Q.terminal
    vals = np.asarray(Q, dtype=float)
    if vals.ndim == 0 or vals.shape[-1] < 1:
        raise InvalidInputError("Q needs at least one sample per path")
    out = vals.sum(axis=-1) * (R / vals.shape[-1])
    return float(out) if np.ndim(out) == 0 else out


def nls_quiescent_general(pot: BoxPotential, Q) -> Union[float, np.ndarray]:
    """``q int_0^R Q dx`` for a general zero-mean driver; a soliton appears when positive."""
    _require_nls_critical(pot)
    return pot.q * _cell_integral(Q, pot.R)


def _check_kdv_eta(pot: BoxPotential, eta0: float) -> float:
    if not 0.0 <= eta0 < math.sqrt(pot.q):
        raise InvalidInputError(f"eta0={eta0} must lie in [0, sqrt(q)={math.sqrt(pot.q):g})")
    return math.sqrt(pot.q - eta0 ** 2)


def kdv_eta_denominator(pot: BoxPotential, eta0: float) -> float:
    """``dF/d eta`` at ``eta0`` for ``F = phi_x(R) + eta phi(R)``."""
    c0 = _check_kdv_eta(pot, eta0)
    R, e = pot.R, eta0
    return (math.cos(c0 * R) * (2 + e * R - e ** 3 * R / c0 ** 2)
            + math.sin(c0 * R) * ((3 * e + 2 * e * e * R) / c0 + e ** 3 / c0 ** 3))


def kdv_variance(pot: BoxPotential, eta0: float, n_quad: int = 4096, alpha: float = 0.5) -> float:
    den = kdv_eta_denominator(pot, eta0)
    y = _midpoints(pot.R, n_quad)
    phi, _ = _bound(pot.q, eta0, y)
    phi_r, _ = _bound(pot.q, eta0, pot.R - y)
    return 2.0 * alpha * _isometry((phi * phi_r) ** 2, pot.R) / den ** 2


def kdv_eta_correction(pot: BoxPotential, eta0: float, path: BrownianPath, alpha: float = 0.5,
                       path_id: int = 0) -> CorrectionResult:
    """``d_eta = int phi0(R-x) phi0(x) dW / (dF/d eta)``."""
    _check_kdv_eta(pot, eta0)
    res = abs(float(_final_condition(pot.q, pot.R, eta0)))
    if res > EIGEN_TOL:
        raise InvalidInputError(f"eta0={eta0} is not an eigenvalue (|F| = {res:.2e})")
    den = kdv_eta_denominator(pot, eta0)
    if abs(den) < DENOMINATOR_FLOOR:
        raise CriticalConfigurationError(f"dF/deta = {den:.3e} at eta0={eta0}")
    st = integrate_kdv_first_order(pot, eta0, path, alpha)
    d_eta = -(st.phi_x + eta0 * st.phi) / den
    d_eta = d_eta if np.ndim(d_eta) else float(d_eta)
    near = eta0 > 0 and _near_critical(kdv_critical_index, pot)
    return CorrectionResult(np.zeros_like(d_eta) if np.ndim(d_eta) else 0.0, d_eta,
                            kdv_variance(pot, eta0, _quad_points(path), alpha), 0.0, den, path_id,
                            near_critical=near)


def kdv_critical_correction(pot: BoxPotential, path: BrownianPath, alpha: float = 0.5,
                            path_id: int = 0) -> CorrectionResult:
    """New eigenvalue at ``sqrt(q) R = n pi``: ``d_eta = (1/2) int cos^2(sqrt(q) x) dW``."""
    n = kdv_critical_index(pot)
    if n is None or n < 1:
        raise CriticalConfigurationError(
            f"sqrt(q) R = {math.sqrt(pot.q) * pot.R} is not a positive multiple of pi (tolerance 1e-8)")
    out = kdv_eta_correction(pot, 0.0, path, alpha, path_id)
    created = np.asarray(out.d_eta) > 0 if np.ndim(out.d_eta) else bool(out.d_eta > 0)
    return CorrectionResult(out.d_xi, out.d_eta, out.variance_eta, 0.0, out.denominator, path_id,
                            created=created)


def kdv_zero_q_correction(path: BrownianPath, alpha: float = 0.5,
                          path_id: int = 0) -> CorrectionResult:
    """Zero background: ``d_eta = W_R / 2``, a soliton appears iff ``W_R > 0``.

    Same recipe as the regular case with ``phi0 = 1`` and ``dF/d eta = 2``; it
    reproduces the weak-well bound state ``eta = (1/2) int U dx``.
    """
    amp = math.sqrt(2.0 * alpha)
    d_eta = 0.5 * amp * path.terminal
    d_eta = d_eta if np.ndim(d_eta) else float(d_eta)
    return CorrectionResult(np.zeros_like(d_eta) if np.ndim(d_eta) else 0.0, d_eta,
                            0.25 * amp ** 2 * path.grid.x_max, 0.0, 2.0, path_id,
                            created=np.asarray(d_eta) > 0 if np.ndim(d_eta) else bool(d_eta > 0))


def kdv_zero_q_general(Q, R: float) -> Union[float, np.ndarray]:
    """``(1/2) int_0^R Q dx``: first-order eigenvalue created by a small driver on a zero background."""
    if not R > 0:
        raise InvalidInputError("R must be positive")
    return 0.5 * _cell_integral(Q, R)
