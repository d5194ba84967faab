"""Independent reference implementations used by the tests.

None of these share code with the package beyond the data classes: the line
integrals use adaptive quadrature with bracketed boundary crossings, the
backprojection is a plain double loop, and the ramp filter is a direct
spatial convolution.
"""

import math

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq


def _indicator(e, x, y):
    c, s = math.cos(e.rotation), math.sin(e.rotation)
    dx, dy = x - e.center[0], y - e.center[1]
    u = c * dx + s * dy
    v = -s * dx + c * dy
    return (u / e.semi_axes[0]) ** 2 + (v / e.semi_axes[1]) ** 2 - 1.0


def line_integral(e, phi, p, n_scan=4001):
    """Chord integral of one ellipse along {x . theta(phi) = p} by quadrature between bracketed boundary crossings."""
    th = np.array([math.cos(phi), math.sin(phi)])
    tp = np.array([-math.sin(phi), math.cos(phi)])
    reach = 1.0 + math.hypot(*e.center) + max(e.semi_axes)

    def g(t):
        x = p * th + t * tp
        return _indicator(e, x[0], x[1])

    ts = np.linspace(-reach, reach, n_scan)
    pts = p * th[None, :] + ts[:, None] * tp[None, :]
    vals = _indicator(e, pts[:, 0], pts[:, 1])
    roots = []
    for i in range(n_scan - 1):
        if vals[i] == 0.0:
            roots.append(ts[i])
        elif vals[i] * vals[i + 1] < 0:
            roots.append(brentq(g, ts[i], ts[i + 1], xtol=1e-14))
    if len(roots) < 2:
        return 0.0
    lo, hi = roots[0], roots[-1]
    inside = lambda t: 1.0 if g(t) < 0 else 0.0
    length, _ = quad(inside, lo, hi, points=roots[1:-1] or None, limit=200, epsabs=1e-12)
    return e.intensity * length


def radon(ph, phi, p):
    return sum(line_integral(e, phi, p) for e in ph.ellipses)


def backproject_direct(values, phis, ps, xs, ys, weight):
    """``weight * sum_j g_j(x . theta_j)`` with linear interpolation, pixel by pixel."""
    out = np.zeros((len(ys), len(xs)))
    dp = ps[1] - ps[0]
    for i, y in enumerate(ys):
        for j, x in enumerate(xs):
            acc = 0.0
            for k, phi in enumerate(phis):
                t = x * math.cos(phi) + y * math.sin(phi)
                u = (t - ps[0]) / dp
                if u < 0 or u > len(ps) - 1:
                    continue
                i0 = min(int(math.floor(u)), len(ps) - 2)
                w = u - i0
                acc += (1 - w) * values[k, i0] + w * values[k, i0 + 1]
            out[i, j] = weight * acc
    return out


def ramp_kernel_quadrature(k, dp):
    """``dp/(2 pi) * int_{-pi/dp}^{pi/dp} |tau| cos(tau k dp) dtau`` by adaptive quadrature."""
    band = math.pi / dp
    val, _ = quad(lambda t: t * math.cos(t * k * dp), 0.0, band, limit=400, epsabs=1e-13, epsrel=1e-13)
    return dp * val / math.pi


def ramp_filter_direct(row, dp):
    """Linear convolution of a row with the sampled band-limited ramp kernel, truncated to the row."""
    n = len(row)
    k = np.arange(-(n - 1), n)
    taps = np.zeros(len(k))
    taps[k == 0] = math.pi / (2 * dp)
    odd = k % 2 != 0
    taps[odd] = -2.0 / (math.pi * k[odd] ** 2 * dp)
    full = np.convolve(row, taps)
    return full[n - 1:2 * n - 1]


def support_branches(e, phi, n=200001):
    """Max and min of ``x . theta(phi)`` over a dense boundary sampling."""
    t = np.linspace(0.0, 2 * math.pi, n)
    c, s = math.cos(e.rotation), math.sin(e.rotation)
    u, v = e.semi_axes[0] * np.cos(t), e.semi_axes[1] * np.sin(t)
    x = e.center[0] + c * u - s * v
    y = e.center[1] + s * u + c * v
    proj = x * math.cos(phi) + y * math.sin(phi)
    return proj.max(), proj.min()
