"""Artifact prediction for masked filtered backprojection, and its numerical checks.

Given a phantom and a mask, the predictor sorts the phantom's singularities
into visible / invisible / on-the-boundary, lists object-dependent and corner
streak lines, and traces the object-independent ``x_b`` curves of the smooth
non-vertical boundary arcs. Two measurement tools check predictions against
data: a windowed-Fourier decay-rate fit on sinograms and a tube-energy
statistic on reconstructed images.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.fft
from scipy.ndimage import uniform_filter
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from ._geometry import VERTICAL, canonicalize, is_vertical, theta, theta_perp
from .grids import Image, Sinogram
from .mask import ApodizedMask, BoundaryArc, Mask, require_valid
from .phantom import Ellipse, Phantom, WavefrontElement, jump_at, radon, tangent_curve, wavefront

RADON_ZERO = 1e-12
TANGENCY_TOL = 1e-6
DEDUP_TOL = 1e-9

OBJECT_DEPENDENT = "object_dependent"
CORNER = "corner"
BOUNDARY_NONSMOOTH = "boundary_nonsmooth"
GUARANTEED = "guaranteed"
POTENTIAL = "potential"


@dataclass(frozen=True)
class SinoCovector:
    """Covector ``omega * (-alpha dtheta + dp)`` at ``(phi, p)``; ``alpha = VERTICAL`` means ``dtheta``."""

    phi: float
    p: float
    alpha: float = 0.0

    def __post_init__(self):
        phi, p = canonicalize(self.phi, self.p)
        alpha = float(self.alpha)
        if float(canonicalize(self.phi, 1.0)[1]) < 0 and not is_vertical(alpha):
            # a half-turn maps (phi, p, alpha) to (phi + pi, -p, -alpha)
            alpha = -alpha
        object.__setattr__(self, "phi", float(phi))
        object.__setattr__(self, "p", float(p))
        object.__setattr__(self, "alpha", alpha)

    @property
    def frequency_direction(self) -> tuple[float, float]:
        """Unit direction in the (angle-frequency, offset-frequency) plane."""
        if is_vertical(self.alpha):
            return (1.0, 0.0)
        n = math.hypot(self.alpha, 1.0)
        return (-self.alpha / n, 1.0 / n)


def ct_project(cov: SinoCovector):
    """Image-side point and direction reached by backprojecting a sinogram covector.

    Returns ``None`` for the vertical covector ``dtheta``, which backprojection smooths away.
    """
    if is_vertical(cov.alpha):
        return None
    th = theta(cov.phi)
    x = cov.p * th + cov.alpha * theta_perp(cov.phi)
    return (float(x[0]), float(x[1])), (float(th[0]), float(th[1]))


@dataclass(frozen=True)
class StreakLine:
    phi: float
    p: float
    cause: str
    status: str
    witnesses: tuple[str, ...] = ()

    def distance(self, x, y):
        return np.abs(np.asarray(x) * math.cos(self.phi) + np.asarray(y) * math.sin(self.phi) - self.p)

    def chord(self, half_width: float = 1.0):
        """Endpoints of the line clipped to the square ``[-half_width, half_width]^2`` (or None)."""
        c, s = math.cos(self.phi), math.sin(self.phi)
        base = np.array([self.p * c, self.p * s])
        d = np.array([-s, c])
        lo, hi = -np.inf, np.inf
        for k in range(2):
            if abs(d[k]) < 1e-15:
                if abs(base[k]) > half_width:
                    return None
                continue
            t1, t2 = (-half_width - base[k]) / d[k], (half_width - base[k]) / d[k]
            lo, hi = max(lo, min(t1, t2)), min(hi, max(t1, t2))
        if lo >= hi:
            return None
        return base + lo * d, base + hi * d


@dataclass(frozen=True)
class XbCurve:
    arc: BoundaryArc = field(repr=False)
    arc_id: int
    phi: np.ndarray = field(repr=False)
    p: np.ndarray = field(repr=False)
    dp: np.ndarray = field(repr=False)
    points: np.ndarray = field(repr=False)
    realized: np.ndarray = field(repr=False)
    in_region: np.ndarray = field(repr=False)

    def portion(self, which: str = "realized") -> np.ndarray:
        sel = self.realized if which == "realized" else ~self.realized
        return self.points[sel]

    def reversal_angles(self) -> list[float]:
        """Angles where the curve's direction of travel reverses."""
        return _reversals(self.phi, self.points)


@dataclass(frozen=True)
class Partition:
    visible: list[WavefrontElement]
    invisible: list[WavefrontElement]
    boundary: list[WavefrontElement]


@dataclass(frozen=True)
class ArtifactPrediction:
    visible: list[WavefrontElement]
    invisible: list[WavefrontElement]
    boundary_cases: list[WavefrontElement]
    streaks: list[StreakLine]
    curves: list[XbCurve]


@dataclass(frozen=True)
class SobolevEstimate:
    location: tuple[float, float]
    direction: tuple[float, float]
    exponent: float
    stderr: float
    radii: np.ndarray = field(repr=False)
    magnitudes: np.ndarray = field(repr=False)


# -- classification ---------------------------------------------------------


def _sort_key(w: WavefrontElement):
    return (round(w.x[0], 12), round(w.x[1], 12), round(w.xi[0], 12), round(w.xi[1], 12))


def classify_singularities(ph: Phantom, m: Mask | ApodizedMask | None, n_samples: int = 64) -> Partition:
    """Visible (line in ``int A``), invisible (outside ``A``), or boundary cases."""
    elems = sorted(wavefront(ph, n_samples), key=_sort_key)
    if m is None:
        return Partition(elems, [], [])
    if isinstance(m, ApodizedMask):
        lines = np.array([w.line() for w in elems]).reshape(-1, 2)
        psi = m.psi(lines[:, 0], lines[:, 1]) if len(elems) else np.zeros(0)
        return Partition([w for w, v in zip(elems, psi) if v > 0], [w for w, v in zip(elems, psi) if v <= 0], [])
    require_valid(m)
    vis, inv, bd = [], [], []
    for w in elems:
        phi, p = w.line()
        if m.on_boundary(phi, p):
            bd.append(w)
        elif m.inside(phi, p):
            vis.append(w)
        else:
            inv.append(w)
    return Partition(vis, inv, bd)


# -- x_b curves -------------------------------------------------------------


def xb_points(phi, p, dp):
    phi = np.asarray(phi, dtype=float)
    return np.asarray(p)[..., None] * theta(phi) + np.asarray(dp)[..., None] * theta_perp(phi)


def small_slope(p, dp):
    """``|p'| < sqrt(1 - p^2)``: the x_b point then lies inside the unit disk."""
    p = np.asarray(p, dtype=float)
    return np.abs(dp) < np.sqrt(np.maximum(1.0 - p * p, 0.0))


def xb_curve(arc: BoundaryArc, ph: Phantom, n_samples: int = 256, arc_id: int = 0,
             region_radius: float = 1.0) -> XbCurve:
    """Sample ``x_b = p theta + p' theta_perp`` along a smooth non-vertical arc."""
    phi, p, dp = arc.sample(n_samples, open_ends=True)
    if not np.all(np.isfinite(dp)):
        raise ValueError(f"arc {arc.label!r} has a vertical tangent at sampled angles; no x_b curve")
    pts = xb_points(phi, p, dp)
    realized = np.abs(radon(ph, phi, p)) > RADON_ZERO
    in_region = np.hypot(pts[:, 0], pts[:, 1]) < region_radius
    return XbCurve(arc, arc_id, phi, p, dp, pts, realized, in_region)


def _reversals(phi, pts):
    if len(phi) < 3:
        return []
    vel = np.gradient(pts, axis=0)
    speed = np.sum(vel * theta_perp(phi), axis=1)
    sign = np.sign(speed)
    out = []
    for i in range(len(sign) - 1):
        if sign[i] != 0 and sign[i + 1] != 0 and sign[i] != sign[i + 1]:
            # linear interpolation of the zero crossing
            t = speed[i] / (speed[i] - speed[i + 1])
            out.append(float(phi[i] + t * (phi[i + 1] - phi[i])))
    return out


# -- streaks ----------------------------------------------------------------


def _ellipse_tag(e: Ellipse) -> str:
    return (f"ellipse(c=({e.center[0]:.6g},{e.center[1]:.6g}),ax=({e.a:.6g},{e.b:.6g}),"
            f"rot={e.rotation:.6g},I={e.intensity:.6g})")


def _singular_tangency(ph: Phantom, e: Ellipse, phi: float, branch: int) -> bool:
    x = e.support_point(phi, branch)
    n = branch * theta(phi)
    return abs(float(jump_at(ph, x, n))) > RADON_ZERO


def _roots(fun, lo: float, hi: float, n: int = 512) -> list[float]:
    xs = np.linspace(lo, hi, n)
    ys = fun(xs)
    if np.all(np.abs(ys) <= TANGENCY_TOL * 1e-3):
        return [float(v) for v in np.linspace(lo, hi, 16)]
    out = []
    for i in range(n - 1):
        a, b = ys[i], ys[i + 1]
        if a == 0.0:
            out.append(float(xs[i]))
        elif a * b < 0:
            out.append(brentq(lambda t: float(fun(np.array([t]))[0]), xs[i], xs[i + 1], xtol=1e-15, rtol=1e-15))
    if ys[-1] == 0.0:
        out.append(float(xs[-1]))
    return out


def object_streaks(ph: Phantom, m: Mask | None, n_bracket: int = 512) -> list[StreakLine]:
    """Lines in ``bd(A)`` that are tangent to a jump of the phantom."""
    if m is None or isinstance(m, ApodizedMask):
        return []
    require_valid(m)
    out = []
    for e in ph.ellipses:
        branches = tangent_curve(e)
        tag = _ellipse_tag(e)
        for branch, name in ((1, "+"), (-1, "-")):
            def pb(phi, _b=branch):
                hi, lo = branches(phi)
                return hi if _b == 1 else lo

            for arc in m.arcs:
                lo, hi = arc.phi_range
                fun = lambda phi, _arc=arc: pb(phi) - _arc.p_of_phi(phi)
                for phi0 in _roots(fun, lo, hi, n_bracket):
                    p0 = float(arc.p_of_phi(np.array([phi0]))[0])
                    if _singular_tangency(ph, e, phi0, branch):
                        out.append(StreakLine(phi0, p0, OBJECT_DEPENDENT, POTENTIAL, (f"{tag}{name}",)))
            for seg in m.verticals:
                p0 = float(pb(np.array([seg.phi]))[0])
                lo, hi = seg.p_range
                if lo - DEDUP_TOL <= p0 <= hi + DEDUP_TOL and _singular_tangency(ph, e, seg.phi, branch):
                    out.append(StreakLine(seg.phi, p0, OBJECT_DEPENDENT, POTENTIAL, (f"{tag}{name}",)))
    return _dedupe(out)


def _normal_singularity(ph: Phantom, phi: float, p: float) -> bool:
    for e in ph.ellipses:
        hi, lo = tangent_curve(e)(phi)
        for branch, val in ((1, hi), (-1, lo)):
            if abs(float(val) - p) <= TANGENCY_TOL and _singular_tangency(ph, e, phi, branch):
                return True
    return False


def corner_streaks(m: Mask | None, ph: Phantom) -> list[StreakLine]:
    """One streak per boundary corner; guaranteed when the data there are nonzero and the line is not tangent to the object."""
    if m is None or isinstance(m, ApodizedMask):
        return []
    require_valid(m)
    cause = BOUNDARY_NONSMOOTH if m.approximate else CORNER
    out = []
    for c in m.corners:
        nonzero = abs(float(radon(ph, c.phi, c.p))) > RADON_ZERO
        guaranteed = nonzero and not _normal_singularity(ph, c.phi, c.p) and not m.approximate
        out.append(StreakLine(c.phi, c.p, cause, GUARANTEED if guaranteed else POTENTIAL,
                              (f"corner({c.phi:.6g},{c.p:.6g})",)))
    return _dedupe(out)


def _same_line(a: StreakLine, b: StreakLine, tol: float = DEDUP_TOL) -> bool:
    for dphi, sign in ((0.0, 1.0), (math.pi, -1.0), (-math.pi, -1.0)):
        if abs(a.phi - (b.phi + dphi)) <= tol and abs(a.p - sign * b.p) <= tol:
            return True
    return False


def _dedupe(streaks: list[StreakLine]) -> list[StreakLine]:
    out: list[StreakLine] = []
    for s in sorted(streaks, key=lambda s: (s.cause != CORNER, s.phi, s.p)):
        for i, kept in enumerate(out):
            if _same_line(s, kept):
                wit = tuple(sorted(set(kept.witnesses) | set(s.witnesses)))
                out[i] = StreakLine(kept.phi, kept.p, kept.cause, kept.status, wit)
                break
        else:
            out.append(StreakLine(s.phi, s.p, s.cause, s.status, tuple(sorted(s.witnesses))))
    return sorted(out, key=lambda s: (round(s.phi, 9), round(s.p, 9), s.cause))


def predict_all(ph: Phantom, m: Mask | ApodizedMask | None, n_wavefront: int = 64, n_curve: int = 256,
                region_radius: float = 1.0) -> ArtifactPrediction:
    """Every singular artifact the masked reconstruction may contain, plus the visibility split."""
    part = classify_singularities(ph, m, n_wavefront)
    if m is None or isinstance(m, ApodizedMask):
        return ArtifactPrediction(part.visible, part.invisible, part.boundary, [], [])
    streaks = _dedupe(object_streaks(ph, m) + corner_streaks(m, ph))
    order = sorted(range(len(m.arcs)), key=lambda k: _arc_key(m.arcs[k]))
    curves = []
    for rank, k in enumerate(order):
        curves.append(xb_curve(m.arcs[k], ph, n_curve, arc_id=rank, region_radius=region_radius))
    return ArtifactPrediction(part.visible, part.invisible, part.boundary, streaks, curves)


def _arc_key(arc: BoundaryArc):
    lo, hi = arc.phi_range
    mid = float(arc.p_of_phi(np.array([0.5 * (lo + hi)]))[0])
    return (round(lo, 12), round(hi, 12), round(mid, 12))


# -- decay-rate estimation --------------------------------------------------


def min_window_sigma(grid, n_levels: int = 5, k_min: float = 4.0) -> float:
    """Smallest window width whose outermost shell stays below half the Nyquist frequency."""
    nyquist = min(math.pi / grid.dphi, math.pi / grid.dp)
    return k_min * 2.0 ** (n_levels - 1) * 2**0.25 / (0.5 * nyquist)


def sobolev_order(s: Sinogram, at: tuple[float, float], direction, window_sigma: float, n_levels: int = 5,
                  k_min: float = 4.0, pad: int = 4, cone_deg: float = 10.0) -> SobolevEstimate:
    """Fit the decay exponent of the localized Fourier transform of the sinogram in a cone.

    The field is multiplied by a Gaussian window of width ``window_sigma``
    centred at ``at`` and Fourier transformed with ``pad``-fold zero padding.
    For dyadic radii ``r_k = (k_min / window_sigma) * 2^k`` the largest
    magnitude within the half-octave shell and the cone of half-angle
    ``cone_deg`` about ``direction`` is recorded, and ``log|g^|`` is regressed
    on ``log r``. ``direction`` is a ``SinoCovector`` or a (angle-frequency,
    offset-frequency) pair.
    """
    if n_levels < 5:
        raise ValueError("the fit needs at least 5 dyadic levels")
    if not window_sigma > 0:
        raise ValueError("window_sigma must be positive")
    if isinstance(direction, SinoCovector):
        dvec = np.array(direction.frequency_direction)
    else:
        dvec = np.asarray(direction, dtype=float)
        dvec = dvec / np.linalg.norm(dvec)
    g = s.grid
    phis, ps = g.phis, g.ps
    phi0, p0 = at
    margin = 4.0 * window_sigma
    if phi0 - margin < phis[0] or phi0 + margin > phis[-1] or p0 - margin < ps[0] or p0 + margin > ps[-1]:
        raise ValueError(f"window at {at} needs a margin of {margin:.4g} inside the sinogram grid")
    reach = 8.0 * window_sigma
    jf = np.flatnonzero(np.abs(phis - phi0) <= reach)
    jp = np.flatnonzero(np.abs(ps - p0) <= reach)
    F, Q = np.meshgrid(phis[jf], ps[jp], indexing="ij")
    win = np.exp(-((F - phi0) ** 2 + (Q - p0) ** 2) / (2.0 * window_sigma**2))
    local = s.values[np.ix_(jf, jp)] * win
    if not np.any(local):
        raise ValueError("windowed field is identically zero; decay fit is degenerate")
    nf = scipy.fft.next_fast_len(pad * len(jf))
    npp = scipy.fft.next_fast_len(pad * len(jp))
    spec = np.abs(scipy.fft.rfft2(local, s=(nf, npp))) * g.dphi * g.dp
    nu = 2.0 * math.pi * scipy.fft.fftfreq(nf, g.dphi)
    tau = 2.0 * math.pi * scipy.fft.rfftfreq(npp, g.dp)
    NU, TAU = np.meshgrid(nu, tau, indexing="ij")
    r = np.hypot(NU, TAU)
    with np.errstate(invalid="ignore", divide="ignore"):
        cosang = np.abs(NU * dvec[0] + TAU * dvec[1]) / r
    in_cone = cosang >= math.cos(math.radians(cone_deg))
    radii = (k_min / window_sigma) * 2.0 ** np.arange(n_levels)
    nyquist = min(math.pi / g.dphi, math.pi / g.dp)
    if radii[-1] * 2**0.25 > 0.5 * nyquist:
        raise ValueError(
            f"largest radius {radii[-1]:.4g} exceeds half the Nyquist frequency {nyquist:.4g}; "
            "increase window_sigma or the grid resolution"
        )
    mags = np.empty(n_levels)
    for k, rk in enumerate(radii):
        sel = in_cone & (r >= rk * 2**-0.25) & (r < rk * 2**0.25)
        if not sel.any():
            raise ValueError(f"no frequency samples in shell {k}; increase padding")
        mags[k] = spec[sel].max()
    mags = np.maximum(mags, np.finfo(float).tiny)
    x, y = np.log(radii), np.log(mags)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    sxx = np.sum((x - x.mean()) ** 2)
    stderr = math.sqrt(np.sum(resid**2) / max(len(x) - 2, 1) / sxx)
    return SobolevEstimate((float(phi0), float(p0)), (float(dvec[0]), float(dvec[1])), float(slope), stderr,
                           radii, mags)


# -- artifact energy --------------------------------------------------------


def _resample_polyline(pts: np.ndarray, step: float) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    if len(pts) < 2:
        return pts
    out = [pts[:1]]
    for a, b in zip(pts[:-1], pts[1:]):
        n = max(1, int(math.ceil(np.hypot(*(b - a)) / step)))
        t = (np.arange(1, n + 1) / n)[:, None]
        out.append(a + t * (b - a))
    return np.concatenate(out)


def _geometry_runs(geometry) -> list[np.ndarray] | None:
    """Polyline runs of a curve-like geometry; ``None`` for a streak line."""
    if isinstance(geometry, StreakLine):
        return None
    if isinstance(geometry, XbCurve):
        return [geometry.points]
    if isinstance(geometry, np.ndarray):
        return [geometry.reshape(-1, 2).astype(float)]
    return [np.asarray(r, dtype=float).reshape(-1, 2) for r in geometry]


def curve_runs(curve: XbCurve, which: str = "realized", inside: float | None = None, margin: float = 0.0,
               avoid=()) -> list[np.ndarray]:
    """Contiguous runs of the realized (or ``"unrealized"``) samples.

    ``inside`` keeps samples within that radius. ``margin > 0`` drops samples
    closer than ``margin`` to the other portion of the curve or to any
    geometry in ``avoid`` (streak lines or point runs), so that a run only
    keeps points whose whole neighbourhood shares its status.
    """
    pts = curve.points
    sel = curve.realized.copy() if which == "realized" else ~curve.realized
    if inside is not None:
        sel &= np.hypot(pts[:, 0], pts[:, 1]) <= inside
    if margin > 0:
        other = pts[~sel if inside is None else (curve.realized != (which == "realized"))]
        if len(other):
            d, _ = cKDTree(other).query(pts)
            sel &= d >= margin
        for g in avoid:
            if isinstance(g, StreakLine):
                sel &= g.distance(pts[:, 0], pts[:, 1]) >= margin
            else:
                dense = np.concatenate([_resample_polyline(r, margin / 4.0) for r in _geometry_runs(g)])
                d, _ = cKDTree(dense).query(pts)
                sel &= d >= margin
    runs, start = [], None
    for i, flag in enumerate(np.append(sel, False)):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            if i - start >= 2:
                runs.append(pts[start:i])
            start = None
    return runs


def split_runs(runs, piece_length: float) -> list[np.ndarray]:
    """Cut polyline runs into consecutive pieces of arc length at most ``piece_length``."""
    out = []
    for run in runs:
        seg = np.hypot(*np.diff(run, axis=0).T)
        arc = np.concatenate([[0.0], np.cumsum(seg)])
        k = np.floor(arc / piece_length).astype(int)
        for j in np.unique(k):
            idx = np.flatnonzero(k == j)
            lo, hi = idx[0], min(idx[-1] + 1, len(run) - 1)
            if hi > lo:
                out.append(run[lo:hi + 1])
    return out


@lru_cache(maxsize=8)
def _pixel_tree(grid) -> cKDTree:
    x, y = grid.mesh()
    return cKDTree(np.column_stack([x.ravel(), y.ravel()]))


def _tube(geometry, grid, width: float) -> np.ndarray:
    """Pixels whose centres lie within ``width`` of the geometry."""
    x, y = grid.mesh()
    if isinstance(geometry, StreakLine):
        return geometry.distance(x, y) <= width
    out = np.zeros(x.size, dtype=bool)
    runs = [r for r in _geometry_runs(geometry) if len(r)]
    if runs:
        dense = np.concatenate([_resample_polyline(r, width / 4.0) for r in runs])
        hits = _pixel_tree(grid).query_ball_point(dense, r=width)
        idx = [i for lst in hits for i in lst]
        out[np.asarray(idx, dtype=np.int64)] = True
    return out.reshape(x.shape)


def _edge_samples(ph: Phantom, grid):
    h = grid.h
    perim = max(2 * math.pi * max(e.semi_axes) for e in ph.ellipses)
    n = max(64, int(math.ceil(perim / (h / 4.0))))
    return wavefront(ph, n)


def edge_distance(ph: Phantom | None, grid) -> np.ndarray:
    """Distance from each pixel centre to the nearest phantom edge with nonzero jump."""
    return _edge_fields(ph, grid)[0]


def _edge_fields(ph: Phantom | None, grid):
    """Edge distance and a residual-texture proxy ``|jump| sqrt(rho / d)`` from the nearest edge point."""
    x, y = grid.mesh()
    if ph is None or not ph.ellipses:
        return np.full(x.shape, np.inf), np.zeros(x.shape)
    elems = _edge_samples(ph, grid)
    if not elems:
        return np.full(x.shape, np.inf), np.zeros(x.shape)
    pts = np.array([w.x for w in elems])
    strength = np.empty(len(elems))
    for i, w in enumerate(elems):
        e = ph.ellipses[w.ellipse]
        phi = math.atan2(w.xi[1], w.xi[0]) - e.rotation
        s2 = (e.a * math.cos(phi)) ** 2 + (e.b * math.sin(phi)) ** 2
        rho = (e.a * e.b) ** 2 / s2**1.5
        strength[i] = abs(w.jump) * math.sqrt(rho)
    d, idx = cKDTree(pts).query(np.column_stack([x.ravel(), y.ravel()]))
    d = d.reshape(x.shape)
    proxy = strength[idx].reshape(x.shape) / np.sqrt(np.maximum(d, grid.h))
    return d, proxy


def boundary_exclusion(ph: Phantom | None, grid, half_width_px: float = 3.0) -> np.ndarray:
    """Pixels within ``half_width_px`` pixels of a phantom edge."""
    return edge_distance(ph, grid) <= half_width_px * grid.h


def high_pass(values: np.ndarray) -> np.ndarray:
    return values - uniform_filter(values, size=5, mode="nearest")


def _random_control(geometry, rng, radius: float, control_angles):
    if isinstance(geometry, StreakLine):
        if control_angles:
            lo, hi = control_angles[rng.integers(len(control_angles))]
            phi = rng.uniform(lo, hi)
        else:
            phi = rng.uniform(0.0, math.pi)
        return StreakLine(float(phi), float(rng.uniform(-radius, radius)), "control", "control")
    runs = _geometry_runs(geometry)
    centroid = np.concatenate(runs).mean(axis=0)
    ang = rng.uniform(0.0, 2.0 * math.pi)
    rot = np.array([[math.cos(ang), -math.sin(ang)], [math.sin(ang), math.cos(ang)]])
    r, t = radius * math.sqrt(rng.uniform()), rng.uniform(0.0, 2.0 * math.pi)
    target = np.array([r * math.cos(t), r * math.sin(t)])
    return [(run - centroid) @ rot.T + target for run in runs]


def phantom_support(ph: Phantom | None, grid) -> np.ndarray:
    x, y = grid.mesh()
    out = np.zeros(x.shape, dtype=bool)
    if ph is not None:
        for e in ph.ellipses:
            out |= e.contains(x, y)
    return out


def artifact_energy(img: Image, geometry, half_width: float = 2.0, phantom: Phantom | None = None,
                    exclude=(), n_controls: int = 16, seed: int = 0, control_angles=None,
                    boundary_half_width: float = 3.0, region_radius: float | None = None,
                    min_fraction: float = 0.5, match_background: bool = True, piece_px: float = 32.0,
                    max_attempts: int = 4000) -> tuple[float, float]:
    """Mean ``|high-pass|`` in a tube around ``geometry`` and in random congruent control tubes.

    The high-pass is the image minus its 5x5 mean. Tubes are restricted to the
    disk of radius ``region_radius`` (default ``0.95*extent``) and never count
    pixels within ``boundary_half_width`` pixels of a phantom edge.

    Control tubes are rigid motions of the geometry: random lines for streaks
    (angles optionally drawn from ``control_angles`` intervals) and randomly
    rotated and translated copies for curves. Curves are handled in pieces of
    at most ``piece_px`` pixels of arc length, each with its own controls, and
    the background is the pixel-weighted mean over pieces. Controls skip
    pixels near the geometry itself and near anything in ``exclude``, and are
    accepted only when at least ``min_fraction`` of the piece's pixel count
    remains. With a phantom and ``match_background``, a control must also
    resemble its piece in median distance to the phantom edges and in the
    fraction of pixels outside the object, because unwindowed FBP leaves a
    residual texture whose level differs between those settings.
    """
    grid = img.grid
    x, y = grid.mesh()
    h = grid.h
    width = half_width * h
    if region_radius is None:
        region_radius = 0.95 * grid.extent
    region = x * x + y * y <= region_radius**2
    dist, texture = _edge_fields(phantom, grid)
    valid = region & ~(dist <= boundary_half_width * h)
    own = _tube(geometry, grid, width)
    signal_px = own & valid
    if not signal_px.any():
        raise ValueError("geometry does not meet the evaluation region")
    hp = np.abs(high_pass(img.values))
    signal = float(hp[signal_px].mean())
    matching = match_background and phantom is not None and bool(phantom.ellipses)
    outside = ~phantom_support(phantom, grid)
    blocked = own.copy()
    for g in exclude:
        blocked |= _tube(g, grid, width)
    allowed = valid & ~blocked

    if isinstance(geometry, StreakLine):
        pieces = [geometry]
    else:
        pieces = split_runs(_geometry_runs(geometry), piece_px * h)
    rng = np.random.default_rng(seed)
    total, weight = 0.0, 0
    for piece in pieces:
        px_sig = _tube(piece, grid, width) & valid
        n_sig = int(px_sig.sum())
        if n_sig == 0:
            continue
        t_ref = float(np.median(texture[px_sig]))
        o_ref = float(outside[px_sig].mean())
        means = []
        attempts = 0
        while len(means) < n_controls and attempts < max_attempts:
            attempts += 1
            ctrl = _random_control(piece, rng, region_radius, control_angles)
            px = _tube(ctrl, grid, width) & allowed
            if px.sum() < max(1, min_fraction * n_sig):
                continue
            if matching and (abs(float(np.median(texture[px])) - t_ref) > 0.2 * t_ref
                             or abs(float(outside[px].mean()) - o_ref) > 0.25):
                continue
            means.append(float(hp[px].mean()))
        if len(means) < n_controls:
            raise ValueError(f"only {len(means)} of {n_controls} valid control tubes found")
        total += n_sig * float(np.mean(means))
        weight += n_sig
    return signal, total / weight


def energy_ratio(signal: float, background: float) -> float:
    if background == 0.0:
        return math.nan if signal == 0.0 else math.inf
    return signal / background
