"""Driving noises: Brownian paths, telegraph processes and their rapidly oscillating rescalings.

Seeding convention: a path with seed ``s`` on noise stream ``k`` draws from
``numpy.random.default_rng([s, k])`` (PCG64 through a SeedSequence).  Monte Carlo
ensembles use ``s = base_seed + path_index`` so results do not depend on how the
ensemble is batched or split across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from .core import InvalidInputError, UnderResolvedError

NOISE_KINDS = ("real_white", "complex_white", "telegraph", "custom_mean")


def path_rng(seed: int, stream: int = 0) -> np.random.Generator:
    if seed < 0 or stream < 0:
        raise InvalidInputError("seeds and stream indices must be non-negative")
    return np.random.default_rng([int(seed), int(stream)])


@dataclass(frozen=True)
class PathGrid:
    """Uniform grid of ``n_steps`` cells on ``[0, x_max]``."""

    x_max: float
    n_steps: int

    def __post_init__(self):
        if not (self.x_max > 0 and math.isfinite(self.x_max)):
            raise InvalidInputError(f"grid length must be positive, got {self.x_max}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 2:
            raise InvalidInputError(f"grid needs at least 2 cells, got n_steps={self.n_steps}")

    @property
    def dx(self) -> float:
        return self.x_max / self.n_steps

    def left_points(self) -> np.ndarray:
        return np.arange(self.n_steps) * self.dx

    def mid_points(self) -> np.ndarray:
        return (np.arange(self.n_steps) + 0.5) * self.dx

    @classmethod
    def with_spacing(cls, x_max: float, dx: float) -> "PathGrid":
        return cls(x_max, max(2, int(math.ceil(x_max / dx - 1e-9))))


@dataclass(frozen=True)
class BrownianPath:
    """Per-cell Wiener increments on a grid.

    ``increments`` has shape ``(n_steps,)`` for one path or ``(n_paths, n_steps)``
    for an ensemble; ``terminal`` then has shape ``()`` or ``(n_paths,)``.
    """

    grid: PathGrid
    increments: np.ndarray
    terminal: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        inc = np.asarray(self.increments, dtype=float)
        if inc.ndim not in (1, 2) or inc.shape[-1] != self.grid.n_steps:
            raise InvalidInputError(
                f"increments shape {inc.shape} does not match grid with {self.grid.n_steps} cells")
        inc.setflags(write=False)
        object.__setattr__(self, "increments", inc)
        object.__setattr__(self, "terminal", inc.sum(axis=-1))

    @property
    def n_paths(self) -> Optional[int]:
        return None if self.increments.ndim == 1 else self.increments.shape[0]

    def values(self) -> np.ndarray:
        """``W`` at the grid nodes ``0, dx, ..., x_max`` (leading zero included)."""
        zero = np.zeros(self.increments.shape[:-1] + (1,))
        return np.concatenate([zero, np.cumsum(self.increments, axis=-1)], axis=-1)

    def negated(self) -> "BrownianPath":
        return BrownianPath(self.grid, -self.increments)

    def select(self, index) -> "BrownianPath":
        return BrownianPath(self.grid, self.increments[index])

    @classmethod
    def zero(cls, grid: PathGrid, n_paths: Optional[int] = None) -> "BrownianPath":
        shape = (grid.n_steps,) if n_paths is None else (n_paths, grid.n_steps)
        return cls(grid, np.zeros(shape))


def sample_brownian(seed: int, grid: PathGrid, stream: int = 0) -> BrownianPath:
    """Independent N(0, dx) increments; identical ``(seed, grid, stream)`` give identical paths."""
    rng = path_rng(seed, stream)
    return BrownianPath(grid, rng.standard_normal(grid.n_steps) * math.sqrt(grid.dx))


def sample_brownian_ensemble(base_seed: int, n_paths: int, grid: PathGrid,
                             stream: int = 0) -> BrownianPath:
    """Stack of paths with seeds ``base_seed + i``; row ``i`` equals ``sample_brownian(base_seed + i)``."""
    if n_paths < 1:
        raise InvalidInputError("need at least one path")
    inc = np.empty((n_paths, grid.n_steps))
    scale = math.sqrt(grid.dx)
    for i in range(n_paths):
        inc[i] = path_rng(base_seed + i, stream).standard_normal(grid.n_steps) * scale
    return BrownianPath(grid, inc)


@dataclass(frozen=True)
class TelegraphPath:
    """Two-state Markov process on ``{-a, +a}`` sampled on a fine grid (one value per cell)."""

    grid: PathGrid
    values: np.ndarray
    amplitude: float
    rate: float

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape[-1] != self.grid.n_steps:
            raise InvalidInputError("telegraph values do not match the grid")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def integrated_covariance(self) -> float:
        return self.amplitude ** 2 / (2 * self.rate)


def _check_telegraph(dx: float, a: float, lam: float) -> float:
    if a <= 0 or lam <= 0:
        raise InvalidInputError(f"telegraph amplitude and rate must be positive (a={a}, lambda={lam})")
    if dx >= 1.0 / (10.0 * lam):
        raise UnderResolvedError(
            f"cell size {dx:g} does not resolve switching at rate {lam:g}; need dx < {1 / (10 * lam):g}")
    # exact flip probability of the symmetric chain over one cell
    return 0.5 * (1.0 - math.exp(-2.0 * lam * dx))


class TelegraphStream:
    """Chunked generator of telegraph values for many paths at once.

    Path ``i`` uses seed ``seeds[i]`` and yields exactly the values of
    ``sample_telegraph(seeds[i], ...)``, without holding the whole path in memory.
    """

    def __init__(self, seeds: Sequence[int], dx: float, a: float = 1.0, lam: float = 1.0,
                 stream: int = 0):
        self.flip_prob = _check_telegraph(dx, a, lam)
        self.a = a
        self._rngs = [path_rng(s, stream) for s in seeds]
        self._state = np.array([a if r.random() >= 0.5 else -a for r in self._rngs])
        self._started = False

    def chunks(self, n_cells: int, chunk: int = 2048) -> Iterator[np.ndarray]:
        """Yield arrays of shape ``(n_paths, m)`` covering ``n_cells`` consecutive cells."""
        done = 0
        while done < n_cells:
            m = min(chunk, n_cells - done)
            yield self._next(m)
            done += m

    def _next(self, m: int) -> np.ndarray:
        n_new = m if self._started else m - 1
        u = np.stack([r.random(n_new) for r in self._rngs]) if n_new > 0 else np.empty((len(self._rngs), 0))
        flips = u < self.flip_prob
        if not self._started:
            flips = np.concatenate([np.zeros((len(self._rngs), 1), bool), flips], axis=1)
            self._started = True
        parity = np.cumsum(flips, axis=1) % 2
        out = self._state[:, None] * np.where(parity == 1, -1.0, 1.0)
        self._state = out[:, -1].copy()
        return out


def sample_telegraph(seed: int, grid: PathGrid, a: float = 1.0, lam: float = 1.0,
                     stream: int = 0) -> TelegraphPath:
    """Telegraph path with switching rate ``lam`` and equidistributed initial state.

    Covariance ``a**2 * exp(-2*lam*|s|)``, integrated covariance ``a**2/(2*lam)``.
    """
    gen = TelegraphStream([seed], grid.dx, a, lam, stream)
    values = np.concatenate(list(gen.chunks(grid.n_steps, chunk=grid.n_steps)), axis=1)[0]
    return TelegraphPath(grid, values, a, lam)


def scaled_noise_value(path: TelegraphPath, epsilon: float, x: float) -> float:
    """``nu(x / eps**2) / eps`` by lookup of the cell containing ``x / eps**2``."""
    if not 0 < epsilon <= 1:
        raise InvalidInputError(f"epsilon must lie in (0, 1], got {epsilon}")
    s = x / epsilon ** 2
    if s < 0 or s > path.grid.x_max * (1 + 1e-12):
        raise InvalidInputError(
            f"x/eps^2 = {s:g} outside the telegraph domain [0, {path.grid.x_max:g}]")
    k = min(int(s / path.grid.dx), path.grid.n_steps - 1)
    return float(path.values[..., k]) / epsilon if path.values.ndim == 1 else path.values[..., k] / epsilon


@dataclass(frozen=True)
class NoiseSpec:
    """Amplitude, integrated covariance and scale of the perturbation.

    ``epsilon=None`` selects the white-noise limit system.
    """

    sigma: float
    alpha: float = 0.5
    epsilon: Optional[float] = None
    kind: str = "real_white"

    def __post_init__(self):
        if self.sigma < 0:
            raise InvalidInputError(f"sigma must be non-negative, got {self.sigma}")
        if self.alpha <= 0:
            raise InvalidInputError(f"alpha must be positive, got {self.alpha}")
        if self.epsilon is not None and not 0 < self.epsilon <= 1:
            raise InvalidInputError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if self.kind not in NOISE_KINDS:
            raise InvalidInputError(f"unknown noise kind {self.kind!r}; expected one of {NOISE_KINDS}")

    @property
    def white_amplitude(self) -> float:
        """Coefficient ``sqrt(2 alpha) sigma`` in front of ``dW`` in the limit system."""
        return math.sqrt(2.0 * self.alpha) * self.sigma
