"""Incomplete-data regions in line space with exact boundary geometry.

A ``Mask`` is a closed set ``A`` of line parameters. It is stored on the
canonical chart ``phi in [0, pi)`` and extended to all angles through
``(phi, p) ~ (phi + pi, -p)``, so it is symmetric by construction. Besides the
membership predicate every mask carries its boundary split into smooth
non-vertical arcs (with slope functions), vertical segments and corners.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from ._geometry import VERTICAL, canonicalize, is_vertical
from .grids import GridMismatchError, Sinogram, SinogramGrid

DEFAULT_P_EXTENT = math.sqrt(2.0)
BOUNDARY_TOL = 1e-9
_POLY_STEP = 1e-3


class InvalidMaskError(ValueError):
    pass


@dataclass(frozen=True)
class BoundaryArc:
    """Graph ``p = p_of_phi(phi)`` over ``phi_range``; ``side`` says where ``int(A)`` lies."""

    phi_range: tuple[float, float]
    p_of_phi: Callable = field(repr=False)
    dp_of_phi: Callable = field(repr=False)
    side: str = "below"
    label: str = ""

    def __post_init__(self):
        if self.side not in ("above", "below"):
            raise ValueError(f"arc side must be 'above' or 'below', got {self.side!r}")
        lo, hi = self.phi_range
        if not lo < hi:
            raise ValueError(f"arc phi_range must be increasing, got {self.phi_range}")

    def sample(self, n: int, open_ends: bool = False) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        lo, hi = self.phi_range
        if open_ends:
            phi = lo + (np.arange(n) + 0.5) * (hi - lo) / n
        else:
            phi = np.linspace(lo, hi, n)
        return phi, np.asarray(self.p_of_phi(phi), dtype=float), np.asarray(self.dp_of_phi(phi), dtype=float)

    def contains(self, phi, p, tol: float = BOUNDARY_TOL):
        phi = np.asarray(phi, dtype=float)
        lo, hi = self.phi_range
        in_range = (phi >= lo - tol) & (phi <= hi + tol)
        pc = np.asarray(self.p_of_phi(np.clip(phi, lo, hi)), dtype=float)
        return in_range & (np.abs(np.asarray(p, dtype=float) - pc) <= tol)

    def polyline(self, step: float = _POLY_STEP) -> np.ndarray:
        lo, hi = self.phi_range
        phi = np.linspace(lo, hi, max(64, int((hi - lo) / step) + 1))
        for _ in range(60):
            p = np.asarray(self.p_of_phi(phi), dtype=float)
            seg = np.hypot(np.diff(phi), np.diff(p))
            long = seg > step
            if not long.any():
                break
            mids = 0.5 * (phi[:-1][long] + phi[1:][long])
            phi = np.sort(np.concatenate([phi, mids]))
        p = np.asarray(self.p_of_phi(phi), dtype=float)
        return np.column_stack([phi, p])


@dataclass(frozen=True)
class VerticalSegment:
    """Segment ``phi = const`` over ``p_range``; ``side`` ('left'/'right') is where ``int(A)`` lies."""

    phi: float
    p_range: tuple[float, float]
    side: str = "left"
    label: str = ""

    def __post_init__(self):
        if self.side not in ("left", "right"):
            raise ValueError(f"vertical side must be 'left' or 'right', got {self.side!r}")
        lo, hi = self.p_range
        if not lo < hi:
            raise ValueError(f"degenerate vertical segment p_range {self.p_range}")

    def contains(self, phi, p, tol: float = BOUNDARY_TOL):
        p = np.asarray(p, dtype=float)
        lo, hi = self.p_range
        return (np.abs(np.asarray(phi, dtype=float) - self.phi) <= tol) & (p >= lo - tol) & (p <= hi + tol)

    def polyline(self, step: float = _POLY_STEP) -> np.ndarray:
        lo, hi = self.p_range
        p = np.linspace(lo, hi, max(2, int((hi - lo) / step) + 1))
        return np.column_stack([np.full_like(p, self.phi), p])


@dataclass(frozen=True)
class Corner:
    phi: float
    p: float
    slopes: tuple[float, float]

    def __post_init__(self):
        s1, s2 = self.slopes
        if (is_vertical(s1) and is_vertical(s2)) or (
            not is_vertical(s1) and not is_vertical(s2) and abs(s1 - s2) < 1e-12
        ):
            raise ValueError(f"corner one-sided tangents must differ, got {self.slopes}")


@dataclass(frozen=True)
class Mask:
    predicate: Callable = field(repr=False)
    arcs: tuple[BoundaryArc, ...] = ()
    verticals: tuple[VerticalSegment, ...] = ()
    corners: tuple[Corner, ...] = ()
    label: str = ""
    p_extent: float = DEFAULT_P_EXTENT
    spec: dict | None = field(default=None, compare=False)
    approximate: bool = False
    tolerance: float = 1e-6
    grid: SinogramGrid | None = None

    def __post_init__(self):
        object.__setattr__(self, "arcs", tuple(self.arcs))
        object.__setattr__(self, "verticals", tuple(self.verticals))
        object.__setattr__(self, "corners", tuple(self.corners))
        object.__setattr__(self, "_index_cache", {})

    def inside(self, phi, p):
        """Membership in the closed set ``A`` (boundary included)."""
        phi_c, p_c = canonicalize(phi, p)
        out = np.asarray(self.predicate(phi_c, p_c), dtype=bool)
        return bool(out) if out.ndim == 0 else out

    @property
    def is_full(self) -> bool:
        return not (self.arcs or self.verticals or self.corners)

    def on_boundary(self, phi, p, tol: float = BOUNDARY_TOL):
        """Whether ``(phi, p)`` lies on a declared boundary piece, seam images included."""
        phi = np.asarray(phi, dtype=float)
        p = np.asarray(p, dtype=float)
        phi_c, p_c = canonicalize(phi, p)
        hit = np.zeros(np.broadcast(phi_c, p_c).shape, dtype=bool)
        for q_phi, q_p in ((phi_c, p_c), (phi_c + math.pi, -p_c), (phi_c - math.pi, -p_c)):
            for piece in (*self.arcs, *self.verticals):
                hit |= piece.contains(q_phi, q_p, tol)
            for c in self.corners:
                hit |= (np.abs(q_phi - c.phi) <= tol) & (np.abs(q_p - c.p) <= tol)
        return bool(hit) if hit.ndim == 0 else hit

    def _index(self, phi_weight: float):
        cache = self._index_cache
        if phi_weight not in cache:
            cache[phi_weight] = _BoundaryIndex(
                [pc.polyline() for pc in (*self.arcs, *self.verticals)], phi_weight
            )
        return cache[phi_weight]

    def boundary_distance(self, phi, p, phi_weight: float = 1.0):
        """Distance in the ``(phi_weight*phi, p)`` metric to the nearest boundary point."""
        if self.is_full:
            return np.full(np.broadcast(np.asarray(phi), np.asarray(p)).shape, np.inf)
        phi_c, p_c = canonicalize(phi, p)
        return self._index(phi_weight).distance(phi_c, p_c)

    def signed_distance(self, phi, p, phi_weight: float = 1.0):
        """Boundary distance, positive inside ``A`` and negative outside."""
        d = self.boundary_distance(phi, p, phi_weight)
        return np.where(self.inside(phi, p), d, -d)


class _BoundaryIndex:
    """Nearest-point queries against polylines, including their half-turn seam images."""

    def __init__(self, polylines: Sequence[np.ndarray], phi_weight: float):
        self.w = float(phi_weight)
        starts, ends = [], []
        for poly in polylines:
            for shift in (0.0, math.pi, -math.pi):
                q = poly.copy()
                if shift:
                    q[:, 0] += shift
                    q[:, 1] *= -1.0
                q[:, 0] *= self.w
                starts.append(q[:-1])
                ends.append(q[1:])
        self.a = np.concatenate(starts)
        self.b = np.concatenate(ends)
        self.tree = cKDTree(0.5 * (self.a + self.b))
        self.reach = 0.5 * float(np.max(np.hypot(*(self.b - self.a).T)))

    def distance(self, phi, p):
        phi, p = np.broadcast_arrays(np.asarray(phi, dtype=float), np.asarray(p, dtype=float))
        q = np.column_stack([self.w * phi.ravel(), p.ravel()])
        k = min(8, len(self.a))
        d_mid, idx = self.tree.query(q, k=k)
        idx = np.atleast_2d(idx.reshape(len(q), k))
        best = np.full(len(q), np.inf)
        for col in range(k):
            a, b = self.a[idx[:, col]], self.b[idx[:, col]]
            ab = b - a
            denom = np.maximum(np.sum(ab * ab, axis=1), 1e-300)
            t = np.clip(np.sum((q - a) * ab, axis=1) / denom, 0.0, 1.0)
            proj = a + t[:, None] * ab
            best = np.minimum(best, np.hypot(*(q - proj).T))
        return best.reshape(phi.shape)


# -- builders ---------------------------------------------------------------


def full(p_extent: float = DEFAULT_P_EXTENT) -> Mask:
    """All lines: complete data (fails the properness check by design)."""
    return Mask(lambda phi, p: np.ones(np.broadcast(phi, p).shape, dtype=bool), label="full",
                p_extent=p_extent, spec={"kind": "full"})


def limited_angle(phi1: float, phi2: float, p_extent: float = DEFAULT_P_EXTENT) -> Mask:
    """Data for all angles except the open wedge ``phi1 < phi < phi2``."""
    if not 0.0 <= phi1 < phi2 < math.pi:
        raise ValueError(f"need 0 <= phi1 < phi2 < pi, got ({phi1}, {phi2})")

    def predicate(phi, p):
        return ~((phi > phi1) & (phi < phi2)) | np.zeros(np.shape(p), dtype=bool)

    verts = (
        VerticalSegment(phi1, (-p_extent, p_extent), "left", "start"),
        VerticalSegment(phi2, (-p_extent, p_extent), "right", "end"),
    )
    return Mask(predicate, verticals=verts, label=f"limited_angle({phi1:.6g},{phi2:.6g})", p_extent=p_extent,
                spec={"kind": "limited_angle", "phi1": phi1, "phi2": phi2, "p_extent": p_extent})


def _const(value):
    return lambda phi: np.full(np.shape(phi), float(value))


def _zero(phi):
    return np.zeros(np.shape(phi))


def roi(r: float, p_extent: float = DEFAULT_P_EXTENT) -> Mask:
    """Lines meeting the centred disk of radius ``r``: ``|p| <= r``."""
    if not r > 0:
        raise ValueError(f"ROI radius must be positive, got {r}")

    def predicate(phi, p):
        return np.abs(p) <= r + 0 * phi

    arcs = (
        BoundaryArc((0.0, math.pi), _const(r), _zero, "below", "top"),
        BoundaryArc((0.0, math.pi), _const(-r), _zero, "above", "bottom"),
    )
    return Mask(predicate, arcs=arcs, label=f"roi({r:.6g})", p_extent=max(p_extent, r),
                spec={"kind": "roi", "r": r, "p_extent": p_extent})


def _check_rect(phi_a, phi_b, p_a, p_b):
    if not (0.0 < phi_a < phi_b < math.pi):
        raise ValueError(f"rectangle angles need 0 < phi_a < phi_b < pi, got ({phi_a}, {phi_b})")
    if not p_a < p_b:
        raise ValueError(f"rectangle offsets need p_a < p_b, got ({p_a}, {p_b})")


def rect_cutout(phi_a: float, phi_b: float, p_a: float, p_b: float, p_extent: float = DEFAULT_P_EXTENT) -> Mask:
    """Complement of the open rectangle ``(phi_a, phi_b) x (p_a, p_b)``."""
    _check_rect(phi_a, phi_b, p_a, p_b)
    m = staircase([((phi_a, phi_b), (p_a, p_b))], p_extent=p_extent)
    return replace(m, label=f"rect_cutout({phi_a:.6g},{phi_b:.6g},{p_a:.6g},{p_b:.6g})",
                   spec={"kind": "rect_cutout", "phi_a": phi_a, "phi_b": phi_b, "p_a": p_a, "p_b": p_b,
                         "p_extent": p_extent})


_EDGE_EPS = 1e-12


def staircase(steps, p_extent: float = DEFAULT_P_EXTENT) -> Mask:
    """Complement of a union of open axis-aligned rectangles ``((phi_lo, phi_hi), (p_lo, p_hi))``.

    Edges shared by adjacent rectangles are dropped from the boundary and the
    corner set is recomputed from the merged outline.
    """
    rects = []
    for k, step in enumerate(steps):
        try:
            (f0, f1), (q0, q1) = step
        except (TypeError, ValueError):
            raise ValueError(f"step {k} must be ((phi_lo, phi_hi), (p_lo, p_hi)), got {step!r}") from None
        _check_rect(float(f0), float(f1), float(q0), float(q1))
        rects.append((float(f0), float(f1), float(q0), float(q1)))
    if not rects:
        raise ValueError("staircase needs at least one step")

    def in_open(phi, p):
        out = np.zeros(np.broadcast(phi, p).shape, dtype=bool)
        for f0, f1, q0, q1 in rects:
            out |= (phi > f0) & (phi < f1) & (p > q0) & (p < q1)
        return out

    def predicate(phi, p):
        # the cutout is the interior of the closed union, so edges shared by two steps stay cut
        phi = np.asarray(phi, dtype=float)
        p = np.asarray(p, dtype=float)
        cut = np.ones(np.broadcast(phi, p).shape, dtype=bool)
        for sf in (-1.0, 1.0):
            for sq in (-1.0, 1.0):
                cut &= in_open(phi + sf * _EDGE_EPS, p + sq * _EDGE_EPS)
        return ~cut

    arcs, verticals, corners = _rectilinear_outline(rects)
    return Mask(predicate, arcs=arcs, verticals=verticals, corners=corners, label=f"staircase({len(rects)})",
                p_extent=p_extent,
                spec={"kind": "staircase", "steps": [[[f0, f1], [q0, q1]] for f0, f1, q0, q1 in rects],
                      "p_extent": p_extent})


def _rectilinear_outline(rects):
    fs = sorted({v for r in rects for v in r[:2]})
    qs = sorted({v for r in rects for v in r[2:]})
    cut = np.zeros((len(fs) + 1, len(qs) + 1), dtype=bool)  # padded cell grid
    for i in range(len(fs) - 1):
        for j in range(len(qs) - 1):
            fm, qm = 0.5 * (fs[i] + fs[i + 1]), 0.5 * (qs[j] + qs[j + 1])
            cut[i + 1, j + 1] = any(f0 < fm < f1 and q0 < qm < q1 for f0, f1, q0, q1 in rects)

    # horizontal edges: along p = qs[j] between fs[i], fs[i+1]
    h_edges = {}
    for i in range(len(fs) - 1):
        for j in range(len(qs)):
            below, above = cut[i + 1, j], cut[i + 1, j + 1]
            if below != above:
                h_edges[(i, j)] = "below" if above else "above"
    v_edges = {}
    for i in range(len(fs)):
        for j in range(len(qs) - 1):
            left, right = cut[i, j + 1], cut[i + 1, j + 1]
            if left != right:
                v_edges[(i, j)] = "left" if right else "right"

    arcs = []
    for j in range(len(qs)):
        i = 0
        while i < len(fs) - 1:
            if (i, j) in h_edges:
                side = h_edges[(i, j)]
                k = i
                while (k + 1, j) in h_edges and h_edges[(k + 1, j)] == side:
                    k += 1
                arcs.append(BoundaryArc((fs[i], fs[k + 1]), _const(qs[j]), _zero, side, f"p={qs[j]:.6g}"))
                i = k + 1
            else:
                i += 1
    verticals = []
    for i in range(len(fs)):
        j = 0
        while j < len(qs) - 1:
            if (i, j) in v_edges:
                side = v_edges[(i, j)]
                k = j
                while (i, k + 1) in v_edges and v_edges[(i, k + 1)] == side:
                    k += 1
                verticals.append(VerticalSegment(fs[i], (qs[j], qs[k + 1]), side, f"phi={fs[i]:.6g}"))
                j = k + 1
            else:
                j += 1
    corners = []
    for i in range(len(fs)):
        for j in range(len(qs)):
            has_h = (i - 1, j) in h_edges or (i, j) in h_edges
            has_v = (i, j - 1) in v_edges or (i, j) in v_edges
            if has_h and has_v:
                corners.append(Corner(fs[i], qs[j], (0.0, VERTICAL)))
    return tuple(arcs), tuple(verticals), tuple(corners)


def sqrt_boundary(a: float, b: float, c: float, p_extent: float = DEFAULT_P_EXTENT) -> Mask:
    """Wedge ``a < phi < b`` plus the region above ``p = c*sqrt(phi - b)`` for ``phi > b``.

    The left edge is vertical at ``a``; the right edge is vertical at ``b`` for
    ``p <= 0`` and continues as the square-root arc, joining it with a vertical
    tangent at ``(b, 0)``. The region is defined on the displayed chart
    ``[0, pi)``; when the arc reaches ``phi = pi`` below ``p_extent`` the
    half-turn identification closes it with a vertical seam at ``phi = 0`` and
    a corner where the arc meets that seam.
    """
    if not c > 0:
        raise ValueError(f"steepness c must be positive, got {c}")
    if not 0.0 < a < b < math.pi:
        raise ValueError(f"need 0 < a < b < pi, got ({a}, {b})")

    def p_of_phi(phi):
        return c * np.sqrt(np.maximum(np.asarray(phi, dtype=float) - b, 0.0))

    def predicate(phi, p):
        # same arc function as the boundary, so arc points stay in the closed set
        return ~((phi > a) & ((phi < b) | (p > p_of_phi(phi))))

    def dp_of_phi(phi):
        u = np.asarray(phi, dtype=float) - b
        with np.errstate(divide="ignore"):
            return np.where(u > 0, c / (2.0 * np.sqrt(np.maximum(u, 0.0))), np.inf)

    phi_exit = b + (p_extent / c) ** 2
    phi_end = min(math.pi, phi_exit)
    arcs = (BoundaryArc((b, phi_end), p_of_phi, dp_of_phi, "below", "sqrt"),)
    verticals = [
        VerticalSegment(a, (-p_extent, p_extent), "left", "left edge"),
        VerticalSegment(b, (-p_extent, 0.0), "right", "right edge"),
    ]
    corners = []
    if phi_exit > math.pi:
        p_seam = c * math.sqrt(math.pi - b)
        verticals.append(VerticalSegment(0.0, (-p_extent, -p_seam), "right", "seam"))
        corners.append(Corner(0.0, -p_seam, (VERTICAL, -float(dp_of_phi(math.pi)))))
    return Mask(predicate, arcs=arcs, verticals=tuple(verticals), corners=tuple(corners),
                label=f"sqrt_boundary({a:.6g},{b:.6g},{c:.6g})", p_extent=p_extent,
                spec={"kind": "sqrt_boundary", "a": a, "b": b, "c": c, "p_extent": p_extent})


def from_raster(values, grid: SinogramGrid, turn_deg: float = 30.0) -> Mask:
    """Approximate mask from a boolean ``(n_phi, n_p)`` lattice (True = data present).

    Membership is nearest-node lookup. The boundary comes from marching squares
    on the lattice; slopes are finite differences of the traced contour and
    corners are places where the traced direction turns by more than
    ``turn_deg``. Everything derived here is approximate and flagged as such.
    """
    from skimage.measure import find_contours

    arr = np.asarray(values, dtype=bool)
    if arr.shape != (grid.n_phi, grid.n_p):
        raise GridMismatchError(f"raster shape {arr.shape} does not match grid {grid}")
    dphi, dp, ps = grid.dphi, grid.dp, grid.ps

    def predicate(phi, p):
        j = np.rint(np.asarray(phi) / dphi).astype(np.int64)
        p = np.asarray(p, dtype=float)
        wrap = j >= grid.n_phi
        pp = np.where(wrap, -p, p)
        j = np.where(wrap, j - grid.n_phi, j)
        k = np.clip(np.rint((pp - ps[0]) / dp).astype(np.int64), 0, grid.n_p - 1)
        return arr[j, k]

    # extra row at phi = pi: the flipped first view closes contours across the seam
    ext = np.vstack([arr, arr[:1, ::-1]]).astype(float)
    arcs, verticals, corners = [], [], []
    for contour in find_contours(ext, 0.5):
        pts = np.column_stack([contour[:, 0] * dphi, ps[0] + contour[:, 1] * dp])
        a_, v_, c_ = _split_contour(pts, predicate, dphi, dp, math.radians(turn_deg))
        arcs += a_
        verticals += v_
        corners += c_
    cell = max(dphi, dp)
    return Mask(predicate, arcs=tuple(arcs), verticals=tuple(verticals), corners=tuple(corners),
                label="raster", p_extent=grid.p_max, approximate=True, tolerance=0.5 * cell, grid=grid)


def _split_contour(pts, predicate, dphi, dp, turn):
    closed = len(pts) > 3 and np.allclose(pts[0], pts[-1])
    if closed:
        pts = pts[:-1]
    n = len(pts)
    if n < 3:
        return [], [], []
    scale = np.array([1.0 / dphi, 1.0 / dp])
    half = 3
    idx = np.arange(n)
    if closed:
        ahead, behind = pts[(idx + half) % n], pts[(idx - half) % n]
    else:
        ahead, behind = pts[np.minimum(idx + half, n - 1)], pts[np.maximum(idx - half, 0)]
    fwd = (ahead - pts) * scale
    bwd = (pts - behind) * scale
    cosang = np.sum(fwd * bwd, axis=1) / np.maximum(np.hypot(*fwd.T) * np.hypot(*bwd.T), 1e-300)
    bend = np.arccos(np.clip(cosang, -1.0, 1.0))
    if not closed:
        bend[:half] = 0
        bend[-half:] = 0
    sharp = bend > turn
    if closed and sharp.any() and not sharp.all():
        # start the loop right after a sharp run so no run wraps around
        shift = int(np.flatnonzero(sharp & ~np.roll(sharp, -1))[0]) + 1
        pts, sharp = np.roll(pts, -shift, axis=0), np.roll(sharp, -shift)
    corner_idx = []
    i = 0
    while i < n:
        if sharp[i]:
            j = i
            while j + 1 < n and sharp[j + 1]:
                j += 1
            corner_idx.append((i + j) // 2)
            i = j + 1
        else:
            i += 1
    cuts = sorted(set([0, n - 1] + corner_idx))
    if closed:
        pts = np.vstack([pts, pts[:1]])
        cuts[-1] = n
    arcs, verticals, corners = [], [], []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        seg = pts[lo : hi + 1]
        if len(seg) < 2:
            continue
        steps = np.diff(seg, axis=0) * scale
        along_p = np.sum(np.abs(steps[:, 1]))
        along_phi = np.sum(np.abs(steps[:, 0]))
        if along_phi <= math.tan(math.radians(10)) * along_p:
            phi0 = float(np.median(seg[:, 0]))
            p_lo, p_hi = float(seg[:, 1].min()), float(seg[:, 1].max())
            if p_hi - p_lo <= 0:
                continue
            probe = predicate(np.array([phi0 - 0.5 * dphi]), np.array([0.5 * (p_lo + p_hi)]))[0]
            verticals.append(VerticalSegment(phi0, (p_lo, p_hi), "left" if probe else "right", "raster"))
        else:
            order = np.argsort(seg[:, 0], kind="stable")
            f, uniq = np.unique(seg[order, 0], return_index=True)
            q = seg[order, 1][uniq]
            if len(f) < 2:
                continue
            slope = np.gradient(q, f)

            def p_of(phi, f=f, q=q):
                return np.interp(phi, f, q)

            def dp_of(phi, f=f, s=slope):
                return np.interp(phi, f, s)

            mid = len(f) // 2
            probe = predicate(np.array([f[mid]]), np.array([q[mid] + 0.5 * dp]))[0]
            arcs.append(BoundaryArc((float(f[0]), float(f[-1])), p_of, dp_of, "above" if probe else "below",
                                    "raster"))
    m = len(pts)
    for k in corner_idx:
        s_in = pts[k] - pts[max(k - half, 0)]
        s_out = pts[min(k + half, m - 1)] - pts[k]
        slopes = tuple(VERTICAL if abs(d[0]) * scale[0] < 0.25 * abs(d[1]) * scale[1] else float(d[1] / d[0])
                       for d in (s_in, s_out))
        try:
            corners.append(Corner(float(pts[k, 0]), float(pts[k, 1]), slopes))
        except ValueError:
            continue
    return arcs, verticals, corners


# -- validation -------------------------------------------------------------


@dataclass
class ValidationReport:
    passed: bool
    violations: list[str]
    checks: dict[str, bool]

    def __bool__(self):
        return self.passed

    def summary(self) -> str:
        lines = [f"{'PASS' if self.passed else 'FAIL'}"]
        lines += [f"  {name}: {'ok' if ok else 'violated'}" for name, ok in self.checks.items()]
        lines += [f"  - {v}" for v in self.violations]
        return "\n".join(lines)


def validate(m: Mask, require_proper: bool = True, n_lattice: int = 181, n_boundary: int = 64,
             seed: int = 0) -> ValidationReport:
    """Check properness, interior, symmetry, closure and boundary/predicate consistency."""
    violations: list[str] = []
    checks: dict[str, bool] = {}
    reach = max([m.p_extent] + [abs(v) for a in m.arcs for v in np.asarray(a.p_of_phi(np.array(a.phi_range)))])
    P = reach
    phis = np.linspace(0.0, math.pi, n_lattice)
    ps = np.linspace(-P, P, n_lattice)
    F, Q = np.meshgrid(phis, ps, indexing="ij")
    ins = m.inside(F, Q)

    proper = not bool(ins.all())
    checks["proper"] = proper
    if not proper and require_proper:
        violations.append("mask contains every sampled line (A is not a proper subset)")

    core = ins[1:-1, 1:-1] & ins[:-2, 1:-1] & ins[2:, 1:-1] & ins[1:-1, :-2] & ins[1:-1, 2:]
    checks["interior"] = bool(core.any())
    if not checks["interior"]:
        violations.append("no interior points found: int(A) is empty at lattice resolution")

    rng = np.random.default_rng(seed)
    tf = rng.uniform(0.0, math.pi, 4000)
    tp = rng.uniform(-P, P, 4000)
    keep = m.boundary_distance(tf, tp) > 1e-6 if not m.is_full else np.ones(len(tf), dtype=bool)
    sym_ok = np.array_equal(m.inside(tf[keep], tp[keep]), m.inside(tf[keep] + math.pi, -tp[keep]))
    checks["symmetric"] = bool(sym_ok)
    if not sym_ok:
        violations.append("inside(phi, p) != inside(phi + pi, -p) at sampled points")

    eps = m.tolerance
    closure_ok = True
    consistent_ok = True
    for k, arc in enumerate(m.arcs):
        lo, hi = arc.phi_range
        margin = 0.02 * (hi - lo)
        sub = BoundaryArc((lo + margin, hi - margin), arc.p_of_phi, arc.dp_of_phi, arc.side)
        phi, p, dp_ = sub.sample(n_boundary, open_ends=True)
        finite = np.isfinite(dp_)
        phi, p, dp_ = phi[finite], p[finite], dp_[finite]
        nrm = np.column_stack([-dp_, np.ones_like(dp_)]) / np.sqrt(1.0 + dp_**2)[:, None]
        up = m.inside(phi + eps * nrm[:, 0], p + eps * nrm[:, 1])
        down = m.inside(phi - eps * nrm[:, 0], p - eps * nrm[:, 1])
        want_up = arc.side == "above"
        on = m.inside(phi, p) | m.approximate
        bad = np.flatnonzero((up != want_up) | (down == want_up))
        if bad.size:
            consistent_ok = False
            i = bad[0]
            violations.append(f"arc {k} ({arc.label}) disagrees with predicate near (phi={phi[i]:.6g}, p={p[i]:.6g})")
        if not on.all() or not (up | down).all():
            closure_ok = False
            i = int(np.flatnonzero(~on | ~(up | down))[0])
            violations.append(f"arc {k} point (phi={phi[i]:.6g}, p={p[i]:.6g}) is not in the closure of int(A)")
    for k, seg in enumerate(m.verticals):
        lo, hi = seg.p_range
        margin = 0.02 * (hi - lo)
        p = lo + margin + (np.arange(n_boundary) + 0.5) * (hi - lo - 2 * margin) / n_boundary
        phi = np.full_like(p, seg.phi)
        left = m.inside(phi - eps, p)
        right = m.inside(phi + eps, p)
        want_left = seg.side == "left"
        on = m.inside(phi, p) | m.approximate
        bad = np.flatnonzero((left != want_left) | (right == want_left))
        if bad.size:
            consistent_ok = False
            i = bad[0]
            violations.append(f"vertical {k} ({seg.label}) disagrees with predicate near (phi={seg.phi:.6g}, p={p[i]:.6g})")
        if not on.all() or not (left | right).all():
            closure_ok = False
            violations.append(f"vertical {k} at phi={seg.phi:.6g} is not in the closure of int(A)")
    for k, c in enumerate(m.corners):
        if not m.approximate and not m.inside(c.phi, c.p):
            closure_ok = False
            violations.append(f"corner {k} at (phi={c.phi:.6g}, p={c.p:.6g}) is not in A")

    # every predicate flip on the lattice must sit next to a declared boundary
    h = max(phis[1] - phis[0], ps[1] - ps[0])
    flips = []
    dv = ins[1:, :] != ins[:-1, :]
    flips.append(np.column_stack([0.5 * (F[1:, :] + F[:-1, :])[dv], Q[1:, :][dv]]))
    dh = ins[:, 1:] != ins[:, :-1]
    flips.append(np.column_stack([F[:, 1:][dh], 0.5 * (Q[:, 1:] + Q[:, :-1])[dh]]))
    mids = np.concatenate(flips)
    if len(mids):
        if m.is_full:
            dist = np.full(len(mids), np.inf)
        else:
            dist = m.boundary_distance(mids[:, 0], mids[:, 1])
        stray = np.flatnonzero(dist > h + m.tolerance)
        if stray.size:
            consistent_ok = False
            i = stray[0]
            violations.append(
                f"predicate changes near (phi={mids[i, 0]:.6g}, p={mids[i, 1]:.6g}) with no declared boundary"
            )
    checks["closure"] = closure_ok
    checks["boundary_consistent"] = consistent_ok
    if not closure_ok and not any("closure" in v for v in violations):
        violations.append("closure condition violated")
    passed = not violations
    return ValidationReport(passed, violations, checks)


def require_valid(m: Mask | None):
    """Raise ``InvalidMaskError`` unless ``m`` passes validation; complete data is accepted."""
    if m is None:
        return
    report = validate(m, require_proper=False)
    if not report.passed:
        raise InvalidMaskError("invalid mask: " + "; ".join(report.violations))


# -- smooth cutoffs ---------------------------------------------------------


def smooth_ramp(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1, 1/2 at t = 1/2."""
    t = np.asarray(t, dtype=float)
    out = np.where(t >= 1.0, 1.0, 0.0)
    mid = (t > 0.0) & (t < 1.0)
    tm = np.where(mid, t, 0.5)
    with np.errstate(over="ignore"):
        val = 1.0 / (1.0 + np.exp(1.0 / tm - 1.0 / (1.0 - tm)))
    return np.where(mid, val, out)


def cos2_ramp(t):
    """C1 alternative: ``sin^2(pi t / 2)`` on [0, 1]."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    return np.sin(0.5 * math.pi * t) ** 2


PROFILES = {"smooth": smooth_ramp, "cos2": cos2_ramp}


@dataclass(frozen=True)
class ApodizedMask:
    base: Mask
    delta: float
    profile: str = "smooth"
    phi_weight: float = 1.0

    def psi(self, phi, p):
        d = self.base.signed_distance(phi, p, self.phi_weight)
        return PROFILES[self.profile](d / self.delta)

    @property
    def grid(self):
        return self.base.grid


def apodize(m: Mask, delta: float, profile: str = "smooth", phi_weight: float = 1.0) -> ApodizedMask:
    """Smooth cutoff ``psi = q(d / delta)``, ``d`` the signed boundary distance."""
    if not delta > 0:
        raise ValueError(f"apodization width must be positive, got {delta}")
    if profile not in PROFILES:
        raise ValueError(f"unknown ramp profile {profile!r}; choose from {sorted(PROFILES)}")
    return ApodizedMask(m, float(delta), profile, float(phi_weight))


def multiplier(mult: Mask | ApodizedMask, grid: SinogramGrid) -> np.ndarray:
    fixed = getattr(mult, "grid", None)
    if fixed is not None and fixed != grid:
        raise GridMismatchError(f"mask is tied to grid {fixed}, sinogram has {grid}")
    F, Q = grid.mesh()
    if isinstance(mult, ApodizedMask):
        return mult.psi(F, Q)
    return mult.inside(F, Q).astype(float)


def apply(mult: Mask | ApodizedMask, s: Sinogram) -> Sinogram:
    """Pointwise ``1_A . g`` or ``psi . g`` at the grid nodes; boundary nodes count as inside."""
    return Sinogram(s.grid, multiplier(mult, s.grid) * s.values)


# -- declarative specs ------------------------------------------------------

_KINDS = {
    "limited_angle": (limited_angle, ("phi1", "phi2")),
    "roi": (roi, ("r",)),
    "rect_cutout": (rect_cutout, ("phi_a", "phi_b", "p_a", "p_b")),
    "sqrt_boundary": (sqrt_boundary, ("a", "b", "c")),
    "staircase": (staircase, ("steps",)),
    "full": (full, ()),
}


def mask_from_spec(doc: dict, raster_loader: Callable | None = None) -> Mask:
    """Build a mask from its ``{"kind": ..., ...}`` document."""
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ValueError("mask document needs a 'kind' field")
    kind = doc["kind"]
    if kind == "raster":
        extra = set(doc) - {"kind", "file"}
        if extra:
            raise ValueError(f"unknown keys for raster mask: {sorted(extra)}")
        if raster_loader is None:
            raise ValueError("raster masks need a file loader")
        values, grid = raster_loader(doc["file"])
        m = from_raster(values, grid)
        return replace(m, spec=dict(doc))
    if kind not in _KINDS:
        raise ValueError(f"unknown mask kind {kind!r}")
    builder, names = _KINDS[kind]
    extra = set(doc) - set(names) - {"kind", "p_extent"}
    if extra:
        raise ValueError(f"unknown keys for {kind} mask: {sorted(extra)}")
    missing = set(names) - set(doc)
    if missing:
        raise ValueError(f"{kind} mask is missing {sorted(missing)}")
    kwargs = {}
    if "p_extent" in doc:
        kwargs["p_extent"] = float(doc["p_extent"])
    args = [_nums(doc[n]) for n in names]
    return builder(*args, **kwargs)


def _num(v) -> float:
    return eval_angle(v) if isinstance(v, str) else float(v)


def _nums(v):
    if isinstance(v, (list, tuple)):
        return [_nums(x) for x in v]
    return _num(v)


def parse_shorthand(text: str) -> dict:
    """``roi:0.8``, ``limited_angle:1.39,1.74``, ``rect_cutout:a,b,p0,p1``, ``sqrt_boundary:a,b,c``."""
    kind, _, rest = text.partition(":")
    if kind == "full":
        return {"kind": "full"}
    if kind not in _KINDS or kind == "staircase":
        raise ValueError(f"mask shorthand must be one of roi, limited_angle, rect_cutout, sqrt_boundary: {text!r}")
    names = _KINDS[kind][1]
    try:
        vals = [float(eval_angle(v)) for v in rest.split(",")] if rest else []
    except ValueError:
        raise ValueError(f"bad numbers in mask shorthand {text!r}") from None
    if len(vals) != len(names):
        raise ValueError(f"{kind} shorthand needs {len(names)} values, got {len(vals)}")
    return {"kind": kind, **dict(zip(names, vals))}


def eval_angle(text: str) -> float:
    """Parse a number, also accepting ``pi`` multiples such as ``4pi/9`` or ``7*pi/18``."""
    t = text.strip().replace("*", "").replace(" ", "")
    if "pi" not in t:
        return float(t)
    num, _, den = t.partition("/")
    coef = num.replace("pi", "")
    coef = 1.0 if coef in ("", "+") else (-1.0 if coef == "-" else float(coef))
    return coef * math.pi / (float(den) if den else 1.0)
