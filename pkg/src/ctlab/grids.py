"""Sampling grids and the sampled fields that live on them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class SinogramGrid:
    """Uniform (angle x offset) grid: ``phi_j = j*pi/n_phi``, ``p_k = -p_max + k*dp`` on ``[0, pi)``."""

    n_phi: int
    n_p: int
    p_max: float = math.sqrt(2.0)

    def __post_init__(self):
        if self.n_phi < 2 or self.n_p < 2:
            raise ValueError(f"sinogram grid needs n_phi >= 2 and n_p >= 2, got {self.n_phi}x{self.n_p}")
        if not self.p_max > 0:
            raise ValueError(f"p_max must be positive, got {self.p_max}")

    @property
    def dphi(self) -> float:
        return math.pi / self.n_phi

    @property
    def dp(self) -> float:
        return 2.0 * self.p_max / (self.n_p - 1)

    @property
    def phis(self) -> np.ndarray:
        return np.arange(self.n_phi) * self.dphi

    @property
    def ps(self) -> np.ndarray:
        # centred index keeps p_k == -p_{n-1-k} bit for bit
        return (np.arange(self.n_p) - (self.n_p - 1) / 2.0) * self.dp

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """``(phi, p)`` arrays of shape ``(n_phi, n_p)``."""
        return np.meshgrid(self.phis, self.ps, indexing="ij")


@dataclass(frozen=True)
class ImageGrid:
    """Square ``n x n`` pixel grid covering ``[-extent, extent]^2``.

    ``values[i, j]`` is the pixel centred at ``(x_j, y_i)``; y increases with i.
    """

    n: int
    extent: float = 1.0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"image grid needs n >= 2, got {self.n}")
        if not self.extent > 0:
            raise ValueError(f"extent must be positive, got {self.extent}")

    @property
    def h(self) -> float:
        return 2.0 * self.extent / self.n

    @property
    def centers(self) -> np.ndarray:
        return -self.extent + (np.arange(self.n) + 0.5) * self.h

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """``(x, y)`` arrays of shape ``(n, n)`` indexed ``[row=y, col=x]``."""
        c = self.centers
        x, y = np.meshgrid(c, c, indexing="xy")
        return x, y


def _check_values(values, shape):
    values = np.asarray(values, dtype=float)
    if values.shape != shape:
        raise ValueError(f"values have shape {values.shape}, expected {shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError("values must be finite")
    return values


@dataclass(frozen=True)
class Sinogram:
    grid: SinogramGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _check_values(self.values, (self.grid.n_phi, self.grid.n_p)))

    def __add__(self, other: Sinogram) -> Sinogram:
        require_same_grid(self.grid, other.grid)
        return Sinogram(self.grid, self.values + other.values)

    @classmethod
    def zeros(cls, grid: SinogramGrid) -> Sinogram:
        return cls(grid, np.zeros((grid.n_phi, grid.n_p)))


@dataclass(frozen=True)
class Image:
    grid: ImageGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "values", _check_values(self.values, (self.grid.n, self.grid.n)))

    def __add__(self, other: Image) -> Image:
        require_same_grid(self.grid, other.grid)
        return Image(self.grid, self.values + other.values)


def require_same_grid(a, b):
    if a != b:
        raise GridMismatchError(f"grid mismatch: {a} vs {b}")
