"""Line-parameter conventions shared across the package.

Lines are ``{x : x . theta(phi) = p}`` with ``theta(phi) = (cos phi, sin phi)``.
``(phi, p)`` and ``(phi + pi, -p)`` describe the same line; the canonical
chart is ``phi in [0, pi)``.
"""

import math

import numpy as np

VERTICAL = math.inf
"""Marker for an infinite (vertical) slope in the (phi, p) plane."""


def theta(phi):
    phi = np.asarray(phi, dtype=float)
    return np.stack([np.cos(phi), np.sin(phi)], axis=-1)


def theta_perp(phi):
    phi = np.asarray(phi, dtype=float)
    return np.stack([-np.sin(phi), np.cos(phi)], axis=-1)


def canonicalize(phi, p):
    """Reduce ``(phi, p)`` to ``phi in [0, pi)`` using ``(phi, p) ~ (phi + pi, -p)``."""
    phi = np.asarray(phi, dtype=float)
    p = np.asarray(p, dtype=float)
    k = np.floor(phi / math.pi)
    phi_c = phi - k * math.pi
    # floating point can leave phi_c == pi exactly
    wrap = phi_c >= math.pi
    phi_c = np.where(wrap, phi_c - math.pi, phi_c)
    k = np.where(wrap, k + 1, k)
    flip = np.where(np.mod(k, 2) == 1, -1.0, 1.0)
    return phi_c, p * flip


def canonicalize_scalar(phi: float, p: float) -> tuple[float, float]:
    a, b = canonicalize(phi, p)
    return float(a), float(b)


def is_vertical(slope) -> bool:
    return slope is None or math.isinf(slope)
