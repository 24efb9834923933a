"""Integration of the scattering flows over ``[0, R]``.

Every system here is linear with a traceless 2x2 generator.  Over one cell the
generator increment ``D = [[a, b], [c, -a]]`` satisfies ``D @ D = (a*a + b*c) I``,
so each one-step map is ``p I + r D`` with scalar ``p, r``:

* ``heun``: stochastic Heun / Stratonovich trapezoid, ``I + D + D**2/2``
* ``rk4``: classical RK4 for frozen coefficients, ``I + D + ... + D**4/24``
* ``expm``: exact exponential of the frozen-coefficient cell

Sign conventions follow the potential ``U = q + (noise)``: the Zakharov-Shabat
flow gets ``+ i U`` off the diagonal, the Schrodinger flow ``phi_xx = -(U + zeta**2) phi``.
The white-noise KdV flow therefore reads ``d phi_x = -(q + zeta**2) phi dx - s phi dW``
with ``s = sqrt(2 alpha) sigma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from .core import (BoxPotential, InvalidInputError, JostState, SchrodingerState, SpectralPoint,
                   UnderResolvedError, as_spectral_point, sin_over)
from .kdv import _bound
from .nls import _jost
from .processes import BrownianPath, NoiseSpec, PathGrid, TelegraphPath, TelegraphStream

SCHEMES = ("heun", "rk4", "expm")
EQUATIONS = ("nls_real", "nls_complex", "kdv")


@dataclass(frozen=True)
class LimitSystemSpec:
    equation: str
    pot: BoxPotential
    zeta: SpectralPoint
    noise: NoiseSpec

    def __post_init__(self):
        if self.equation not in EQUATIONS:
            raise InvalidInputError(f"unknown equation {self.equation!r}; expected one of {EQUATIONS}")
        object.__setattr__(self, "zeta", as_spectral_point(self.zeta))
        if self.equation == "kdv" and self.zeta.xi != 0:
            raise InvalidInputError("the KdV flow is only used on the imaginary axis zeta = i*eta")


@dataclass(frozen=True)
class FlowResult:
    """Terminal state of a flow; ``trajectory`` (if kept) has shape ``(n_steps + 1, 2, ...)``."""

    terminal_state: Union[JostState, SchrodingerState]
    grid: PathGrid
    trajectory: Optional[np.ndarray] = None


def _step_coefficients(a, b, c, scheme):
    s2 = a * a + b * c
    if scheme == "heun":
        return 1.0 + 0.5 * s2, 1.0
    if scheme == "rk4":
        return 1.0 + s2 / 2.0 + s2 * s2 / 24.0, 1.0 + s2 / 6.0
    if scheme == "expm":
        t = np.sqrt(-(s2 + 0j))
        p, r = np.cos(t), np.sinc(t / np.pi)
        if not np.iscomplexobj(s2):
            p, r = p.real, r.real
        return p, r
    raise InvalidInputError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")


def _propagate(y1, y2, coefficients: Iterable, scheme: str, keep: bool = False):
    traj = [(y1, y2)] if keep else None
    for a, b, c in coefficients:
        p, r = _step_coefficients(a, b, c, scheme)
        y1, y2 = p * y1 + r * (a * y1 + b * y2), p * y2 + r * (c * y1 - a * y2)
        if keep:
            traj.append((y1, y2))
    return y1, y2, traj


def _columns(increments: Optional[np.ndarray], n_steps: int):
    """Per-step rows of an ``(..., n_steps)`` increment array (``None`` means zero noise)."""
    if increments is None:
        return [0.0] * n_steps
    inc = np.asarray(increments)
    return np.ascontiguousarray(np.moveaxis(inc, -1, 0))


def _check_grid(pot: BoxPotential, path: BrownianPath) -> PathGrid:
    if not math.isclose(path.grid.x_max, pot.R, rel_tol=1e-12):
        raise InvalidInputError(
            f"path grid covers [0, {path.grid.x_max}] but the box has R={pot.R} (grid mismatch)")
    return path.grid


def _broadcast_initial(value, shape):
    return np.full(shape, value, dtype=complex) if shape else complex(value)


def _nls_terminal(q, R, zeta, w1, dW1, w2=0.0, dW2=None, scheme="heun", keep=False):
    """Vectorised ZS flow; ``dW*`` have shape ``(..., n_steps)``; ``zeta`` broadcasts against ``...``."""
    n = np.shape(dW1)[-1]
    h = R / n
    cols1 = _columns(dW1, n)
    cols2 = _columns(dW2, n)
    a = -1j * np.asarray(zeta) * h
    shape = np.broadcast_shapes(np.shape(dW1)[:-1], np.shape(zeta))

    def coeffs():
        for k in range(n):
            u = 1j * (q * h + w1 * cols1[k])
            v = w2 * cols2[k]
            yield a, u - v, u + v

    y1, y2, traj = _propagate(_broadcast_initial(1.0, shape), _broadcast_initial(0.0, shape),
                              coeffs(), scheme, keep)
    return y1, y2, traj


def _kdv_terminal(q, R, eta, w, dW, scheme="heun", keep=False):
    n = np.shape(dW)[-1]
    h = R / n
    cols = _columns(dW, n)
    eta = np.asarray(eta, dtype=float)
    base = (eta * eta - q) * h
    shape = np.broadcast_shapes(np.shape(dW)[:-1], eta.shape)
    phi = np.ones(shape) if shape else 1.0
    dphi = np.broadcast_to(eta, shape).astype(float) if shape else float(eta)

    def coeffs():
        for k in range(n):
            yield 0.0, h, base - w * cols[k]

    return _propagate(phi, dphi, coeffs(), scheme, keep)


def _trajectory(traj):
    if traj is None:
        return None
    return np.stack([np.stack([np.asarray(t[0]), np.asarray(t[1])]) for t in traj])


def integrate_nls_limit(spec: LimitSystemSpec, path: BrownianPath, scheme: str = "heun",
                        keep_trajectory: bool = False) -> FlowResult:
    """White-noise Zakharov-Shabat flow from ``(1, 0)`` (Stratonovich form, real noise).

    ``path`` may carry a single path or an ensemble; the terminal state is then per path.
    """
    grid = _check_grid(spec.pot, path)
    w = spec.noise.white_amplitude
    y1, y2, traj = _nls_terminal(spec.pot.q, spec.pot.R, spec.zeta.zeta, w, path.increments,
                                 scheme=scheme, keep=keep_trajectory)
    return FlowResult(JostState(y1, y2), grid, _trajectory(traj))


def integrate_nls_complex_limit(spec: LimitSystemSpec, path1: BrownianPath, path2: BrownianPath,
                                scheme: str = "heun", keep_trajectory: bool = False) -> FlowResult:
    """Flow driven by ``U = q + s (dW1 + i dW2)/dx``: two independent Wiener processes."""
    grid = _check_grid(spec.pot, path1)
    _check_grid(spec.pot, path2)
    if path1.increments.shape != path2.increments.shape:
        raise InvalidInputError("the two noises must live on the same grid")
    w = spec.noise.white_amplitude
    y1, y2, traj = _nls_terminal(spec.pot.q, spec.pot.R, spec.zeta.zeta, w, path1.increments,
                                 w, path2.increments, scheme=scheme, keep=keep_trajectory)
    return FlowResult(JostState(y1, y2), grid, _trajectory(traj))


def integrate_kdv_limit(spec: LimitSystemSpec, path: BrownianPath, scheme: str = "heun",
                        keep_trajectory: bool = False) -> FlowResult:
    """White-noise Schrodinger flow from ``(phi, phi_x) = (1, eta)`` on ``zeta = i*eta``.

    The noise multiplies ``phi`` in the ``phi_x`` equation only, so Ito and
    Stratonovich readings coincide and the Heun scheme converges to either.
    """
    grid = _check_grid(spec.pot, path)
    w = spec.noise.white_amplitude
    phi, dphi, traj = _kdv_terminal(spec.pot.q, spec.pot.R, spec.zeta.eta, w, path.increments,
                                    scheme=scheme, keep=keep_trajectory)
    return FlowResult(SchrodingerState(phi, dphi), grid, _trajectory(traj))


# -- first-order (stochastic convolution) systems ---------------------------------------

def _check_nls_base(pot: BoxPotential, eta0: float) -> None:
    if not 0.0 <= eta0 < pot.q:
        raise InvalidInputError(f"eta0={eta0} must lie in [0, q={pot.q})")


def nls_first_order_kernels(pot: BoxPotential, eta0: float, y, alpha: float = 0.5):
    """Kernels ``K1, K2`` (shape ``(2, len(y))``) with ``Psi1(R) = int K1 dW1 + int K2 dW2``.

    ``K1 = i sqrt(2a) exp(M (R-y)) [[0,1],[1,0]] Psi0(y)`` and
    ``K2 = -sqrt(2a) exp(M (R-y)) [[0,1],[-1,0]] Psi0(y)`` with ``M = [[eta0, iq], [iq, -eta0]]``.
    """
    _check_nls_base(pot, eta0)
    q, R = pot.q, pot.R
    y = np.asarray(y, dtype=float)
    c0 = math.sqrt(q * q - eta0 * eta0)
    p1, p2 = _jost(q, 1j * eta0, y)
    t = R - y
    cs, sn = np.cos(c0 * t), sin_over(c0, t)
    # exp(M t) = cos(c0 t) I + sin(c0 t)/c0 M
    def apply(v1, v2):
        return cs * v1 + sn * (eta0 * v1 + 1j * q * v2), cs * v2 + sn * (1j * q * v1 - eta0 * v2)

    amp = math.sqrt(2.0 * alpha)
    k1 = np.stack(apply(p2, p1)) * (1j * amp)
    k2 = np.stack(apply(p2, -p1)) * (-amp)
    return k1, k2


def integrate_nls_first_order(pot: BoxPotential, eta0: float, path: BrownianPath,
                              path2: Optional[BrownianPath] = None, alpha: float = 0.5) -> JostState:
    """``d Psi / d sigma`` at ``sigma = 0`` and ``x = R`` by left-point stochastic convolution."""
    grid = _check_grid(pot, path)
    k1, k2 = nls_first_order_kernels(pot, eta0, grid.left_points(), alpha)
    out = path.increments @ k1.T
    if path2 is not None:
        _check_grid(pot, path2)
        out = out + path2.increments @ k2.T
    return JostState(out[..., 0], out[..., 1])


def kdv_first_order_kernels(pot: BoxPotential, eta0: float, y, alpha: float = 0.5):
    """Kernels of ``(d phi/d sigma, d phi_x/d sigma)(R)`` against ``dW``: shape ``(2, len(y))``."""
    if not 0.0 <= eta0 < math.sqrt(pot.q):
        raise InvalidInputError(f"eta0={eta0} must lie in [0, sqrt(q)={math.sqrt(pot.q):g})")
    q, R = pot.q, pot.R
    y = np.asarray(y, dtype=float)
    c = math.sqrt(q - eta0 * eta0)
    phi0, _ = _bound(q, eta0, y)
    t = R - y
    amp = math.sqrt(2.0 * alpha)
    return -amp * np.stack([sin_over(c, t) * phi0, np.cos(c * t) * phi0])


def integrate_kdv_first_order(pot: BoxPotential, eta0: float, path: BrownianPath,
                              alpha: float = 0.5) -> SchrodingerState:
    grid = _check_grid(pot, path)
    k = kdv_first_order_kernels(pot, eta0, grid.left_points(), alpha)
    out = path.increments @ k.T
    return SchrodingerState(out[..., 0], out[..., 1])


# -- rapidly oscillating (epsilon) systems ----------------------------------------------

def _eps_cells(R: float, eps: float, cell: float) -> Tuple[int, float, float]:
    """Number of telegraph cells covering ``[0, R]`` and the x-length of full / last cell."""
    h = eps * eps * cell
    n_full = int(math.floor(R / h + 1e-9))
    rest = R - n_full * h
    if rest <= 1e-12 * R:
        return n_full, h, h
    return n_full + 1, h, rest


def _eps_flow(equation, q, R, zeta, sigma, eps, cell, chunks, n_cells, h, h_last, scheme,
              chunks2=None):
    s = sigma / eps
    zeta = complex(zeta)

    def coeffs():
        k = 0
        it2 = iter(chunks2) if chunks2 is not None else None
        for block in chunks:
            block2 = next(it2) if it2 is not None else None
            for j in range(block.shape[-1]):
                hk = h_last if k == n_cells - 1 else h
                nu = block[..., j]
                if equation == "kdv":
                    yield 0.0, hk, -(q + s * nu + zeta * zeta).real * hk
                else:
                    u = 1j * (q + s * nu) * hk
                    v = 0.0 if block2 is None else s * block2[..., j] * hk
                    yield -1j * zeta * hk, u - v, u + v
                k += 1

    if equation == "kdv":
        eta = zeta.imag
        return _propagate(1.0, eta, coeffs(), scheme)
    return _propagate(1.0 + 0j, 0j, coeffs(), scheme)


def _check_eps(noise: NoiseSpec, cell: float, lam: float) -> float:
    if noise.epsilon is None:
        raise InvalidInputError("the epsilon system needs noise.epsilon")
    if cell >= 1.0 / (10.0 * lam):
        raise UnderResolvedError(
            f"telegraph cell {cell:g} too coarse for switching rate {lam:g}: need < {1 / (10 * lam):g}")
    return noise.epsilon


def integrate_eps_system(equation: str, pot: BoxPotential, zeta, noise: NoiseSpec,
                         tpath: TelegraphPath, tpath2: Optional[TelegraphPath] = None,
                         scheme: str = "rk4") -> FlowResult:
    """Flow with coefficient ``q + (sigma/eps) nu(x/eps**2)``, frozen on each telegraph cell.

    ``tpath`` lives on the fast variable ``x/eps**2`` and must cover ``[0, R/eps**2]``.
    ``tpath2`` (``nls_complex`` only) supplies the imaginary part of the perturbation.
    """
    if equation not in EQUATIONS:
        raise InvalidInputError(f"unknown equation {equation!r}")
    if (equation == "nls_complex") != (tpath2 is not None):
        raise InvalidInputError("nls_complex needs exactly two telegraph paths")
    eps = _check_eps(noise, tpath.grid.dx, tpath.rate)
    z = as_spectral_point(zeta).zeta
    if equation == "kdv" and z.real != 0:
        raise InvalidInputError("the KdV flow is only used on zeta = i*eta")
    if tpath.grid.x_max < pot.R / eps ** 2 * (1 - 1e-9):
        raise InvalidInputError(
            f"telegraph path covers [0, {tpath.grid.x_max:g}] but [0, R/eps^2 = {pot.R / eps ** 2:g}] is needed")
    n_cells, h, h_last = _eps_cells(pot.R, eps, tpath.grid.dx)
    vals = tpath.values[..., :n_cells]
    vals2 = None if tpath2 is None else [tpath2.values[..., :n_cells]]
    y1, y2, _ = _eps_flow(equation, pot.q, pot.R, z, noise.sigma, eps, tpath.grid.dx, [vals],
                          n_cells, h, h_last, scheme, vals2)
    grid = PathGrid(pot.R, max(n_cells, 2))
    state = SchrodingerState(y1, y2) if equation == "kdv" else JostState(y1, y2)
    return FlowResult(state, grid)


def eps_terminal_ensemble(equation: str, pot: BoxPotential, zeta, noise: NoiseSpec,
                          seeds: Sequence[int], cell: float = 0.05, a: float = 1.0,
                          lam: float = 1.0, scheme: str = "rk4"):
    """Terminal states of the epsilon system for many telegraph paths, streamed chunk by chunk.

    Path ``i`` is driven by ``sample_telegraph(seeds[i], ...)`` (and stream 1 for the
    imaginary part when ``equation == 'nls_complex'``).
    """
    eps = _check_eps(noise, cell, lam)
    z = as_spectral_point(zeta).zeta
    n_cells, h, h_last = _eps_cells(pot.R, eps, cell)
    chunks = TelegraphStream(seeds, cell, a, lam).chunks(n_cells)
    chunks2 = TelegraphStream(seeds, cell, a, lam, stream=1).chunks(n_cells) \
        if equation == "nls_complex" else None
    y1, y2, _ = _eps_flow(equation, pot.q, pot.R, z, noise.sigma, eps, cell, chunks, n_cells,
                          h, h_last, scheme, chunks2)
    return np.broadcast_to(y1, (len(seeds),)).copy(), np.broadcast_to(y2, (len(seeds),)).copy()
