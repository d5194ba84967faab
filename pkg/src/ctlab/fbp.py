"""Filtered backprojection: ramp filter, backprojection and the masked pipelines."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import scipy.fft

from .grids import GridMismatchError, Image, ImageGrid, Sinogram, SinogramGrid, require_same_grid

__all__ = [
    "GridMismatchError",
    "Image",
    "ImageGrid",
    "Sinogram",
    "SinogramGrid",
    "backproject",
    "backproject_views",
    "l2_error",
    "lambda_filter",
    "ram_lak_taps",
    "reconstruct",
]

NORMALIZATION = 1.0 / (4.0 * math.pi)


def padded_length(n_p: int) -> int:
    return 1 << int(math.ceil(math.log2(2 * n_p)))


def ram_lak_taps(n: int, dp: float) -> np.ndarray:
    """Band-limited ramp kernel sampled at ``k*dp`` for ``|k| < n/2``, times ``dp``, in FFT order.

    ``(1/2pi) * int_{|tau|<pi/dp} |tau| exp(i tau k dp) dtau * dp`` equals
    ``pi/(2 dp)`` at ``k = 0``, ``-2/(pi k^2 dp)`` for odd ``k`` and 0 otherwise.
    """
    k = np.fft.fftfreq(n, d=1.0 / n)
    taps = np.zeros(n)
    taps[0] = math.pi / (2.0 * dp)
    odd = (np.abs(k) % 2) == 1
    taps[odd] = -2.0 / (math.pi * k[odd] ** 2 * dp)
    return taps


def filter_response(n_p: int, dp: float, window: str = "ramp") -> np.ndarray:
    """Real frequency response (rfft layout) of the offset filter on the padded row."""
    n = padded_length(n_p)
    response = scipy.fft.rfft(ram_lak_taps(n, dp)).real
    if window == "hann":
        freq = np.arange(len(response)) / n  # cycles per sample, Nyquist at 0.5
        response = response * 0.5 * (1.0 + np.cos(2.0 * math.pi * freq))
    elif window != "ramp":
        raise ValueError(f"unknown filter window {window!r}")
    return response


def lambda_filter(s: Sinogram, window: str = "ramp", workers: int = 1) -> Sinogram:
    """Apply the ``|tau|`` multiplier along p, view by view, with linear (zero-padded) convolution.

    The default ``ramp`` window is the unapodized operator. ``hann`` rolls the
    response off towards Nyquist; it is a display aid and not the ``|tau|`` operator.
    """
    n_p = s.grid.n_p
    n = padded_length(n_p)
    response = filter_response(n_p, s.grid.dp, window)
    spectrum = scipy.fft.rfft(s.values, n=n, axis=1, workers=workers)
    out = scipy.fft.irfft(spectrum * response[None, :], n=n, axis=1, workers=workers)[:, :n_p]
    return Sinogram(s.grid, out)


def _interp_view(row, p0, dp, t):
    u = (t - p0) / dp
    n_p = row.shape[0]
    valid = (u >= 0.0) & (u <= n_p - 1)
    i0 = np.clip(np.floor(u).astype(np.int64), 0, n_p - 2)
    w = u - i0
    vals = (1.0 - w) * row[i0] + w * row[i0 + 1]
    return np.where(valid, vals, 0.0)


def backproject_views(values, phis, p_axis, grid: ImageGrid, weight: float, workers: int = 1) -> Image:
    """``weight * sum_j g_j(x . theta(phi_j))`` with linear interpolation in p.

    ``p_axis`` must be uniform. Pixels are split into row blocks across workers;
    each block accumulates views in the same order, so the result does not
    depend on the worker count.
    """
    values = np.asarray(values, dtype=float)
    phis = np.asarray(phis, dtype=float)
    p0 = float(p_axis[0])
    dp = float(p_axis[1] - p_axis[0])
    cos_t, sin_t = np.cos(phis), np.sin(phis)
    x, y = grid.mesh()

    def block(rows):
        xb, yb = x[rows], y[rows]
        acc = np.zeros_like(xb)
        for j in range(len(phis)):
            acc += _interp_view(values[j], p0, dp, xb * cos_t[j] + yb * sin_t[j])
        return acc

    if workers <= 1:
        acc = block(slice(0, grid.n))
    else:
        bounds = np.linspace(0, grid.n, workers + 1).astype(int)
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(block, [slice(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:])]))
        acc = np.concatenate(parts, axis=0)
    return Image(grid, weight * acc)


def backproject(s: Sinogram, grid: ImageGrid, workers: int = 1) -> Image:
    """Dual transform over the full circle from half-range data (factor 2 by symmetry)."""
    return backproject_views(s.values, s.grid.phis, s.grid.ps, grid, 2.0 * s.grid.dphi, workers)


def reconstruct(s: Sinogram, m=None, grid: ImageGrid | None = None, window: str = "ramp", workers: int = 1) -> Image:
    """``R* Lambda (m . g) / (4 pi)``; ``m`` is a ``Mask``, an ``ApodizedMask`` or ``None``."""
    if grid is None:
        grid = ImageGrid(256, 1.0)
    if m is not None:
        from .mask import apply

        s = apply(m, s)
    filtered = lambda_filter(s, window=window, workers=workers)
    img = backproject(filtered, grid, workers=workers)
    return Image(grid, img.values * NORMALIZATION)


def disk_region(grid: ImageGrid, radius: float | None = None) -> np.ndarray:
    if radius is None:
        radius = 0.95 * grid.extent
    x, y = grid.mesh()
    return x * x + y * y <= radius * radius


def l2_error(a: Image, b: Image, region: float | np.ndarray | None = None) -> float:
    """``||a - b|| / ||b||`` over a disk (radius or boolean mask); default radius ``0.95*extent``."""
    require_same_grid(a.grid, b.grid)
    if isinstance(region, np.ndarray):
        sel = region.astype(bool)
    else:
        sel = disk_region(a.grid, region)
    diff = a.values[sel] - b.values[sel]
    ref = np.linalg.norm(b.values[sel])
    if ref == 0:
        raise ValueError("reference image vanishes on the region")
    return float(np.linalg.norm(diff) / ref)
