import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from ctlab import mask as M
from ctlab import microlocal as ML
from ctlab import phantom as P
from ctlab._geometry import VERTICAL, theta
from ctlab.grids import Image, ImageGrid, Sinogram, SinogramGrid

PI = math.pi
LIMITED = M.limited_angle(4 * PI / 9, 5 * PI / 9)
CUTOUT = M.rect_cutout(7 * PI / 18, 11 * PI / 18, -0.35, 0.35)


# -- covectors --------------------------------------------------------------


@given(st.floats(0, 2 * PI), st.floats(-1.5, 1.5), st.floats(-3, 3))
def test_covector_identification(phi, p, alpha):
    a = ML.SinoCovector(phi, p, alpha)
    assert 0.0 <= a.phi < PI
    b = ML.SinoCovector(phi + PI, -p, -alpha)
    sign = 1.0
    if abs(a.phi - b.phi) > PI / 2:
        # rounding put the two on opposite sides of the seam phi = 0 ~ pi
        sign = -1.0
        assert abs(abs(a.phi - b.phi) - PI) <= 1e-12
    else:
        assert a.phi == pytest.approx(b.phi, abs=1e-12)
    assert a.p == pytest.approx(sign * b.p, abs=1e-12)
    assert a.alpha == pytest.approx(sign * b.alpha, abs=1e-12)


def test_ct_project_examples():
    x, xi = ML.ct_project(ML.SinoCovector(0.3, 0.5, 0.0))
    assert np.allclose(x, 0.5 * theta(0.3), atol=1e-15)
    assert np.allclose(xi, theta(0.3), atol=1e-15)
    assert ML.ct_project(ML.SinoCovector(0.3, 0.5, VERTICAL)) is None
    assert ML.SinoCovector(0.3, 0.5, VERTICAL).frequency_direction == (1.0, 0.0)
    assert ML.SinoCovector(0.3, 0.5, 0.0).frequency_direction == pytest.approx((0.0, 1.0))


# -- classification ---------------------------------------------------------


def _find(elems, x, tol=1e-9):
    return [w for w in elems if math.hypot(w.x[0] - x[0], w.x[1] - x[1]) < tol]


def test_classify_limited_angle_unit_disk():
    part = ML.classify_singularities(P.unit_disk(), LIMITED, 64)
    assert _find(part.invisible, (0.0, 1.0))
    assert _find(part.visible, (1.0, 0.0))
    assert len(part.visible) + len(part.invisible) + len(part.boundary) == 64


def test_classify_full_mask_all_visible(skull):
    for m in (None, M.full()):
        part = ML.classify_singularities(skull, m, 32)
        assert not part.invisible and not part.boundary
        assert len(part.visible) == len(P.wavefront(skull, 32))


def test_classify_boundary_case():
    # 4 pi/9 is sampled exactly when n = 18: the element at angle 4 pi/9 sits on bd(A)
    part = ML.classify_singularities(P.unit_disk(), LIMITED, 18)
    assert len(part.boundary) >= 1


def test_classify_rejects_invalid():
    with pytest.raises(M.InvalidMaskError):
        ML.classify_singularities(P.unit_disk(), M.Mask(M.roi(0.5).predicate), 16)


@pytest.mark.parametrize("m", [LIMITED, CUTOUT, M.roi(0.8)], ids=lambda m: m.label)
def test_partition_exhaustive_and_disjoint(skull, m):
    part = ML.classify_singularities(skull, m, 48)
    ids = [id(w) for w in part.visible + part.invisible + part.boundary]
    assert len(ids) == len(set(ids))
    assert len(ids) == len(P.wavefront(skull, 48))


# -- x_b curves -------------------------------------------------------------


def test_xb_roi_circle():
    m = M.roi(0.8)
    top = next(a for a in m.arcs if a.side == "below")
    c = ML.xb_curve(top, P.unit_disk(), 200)
    assert np.max(np.abs(np.hypot(*c.points.T) - 0.8)) <= 1e-12
    assert c.realized.all() and c.in_region.all()


def test_xb_point_arc():
    x0 = np.array([0.3, -0.2])
    arc = M.BoundaryArc((0.2, 2.5), lambda f: x0[0] * np.cos(f) + x0[1] * np.sin(f),
                        lambda f: -x0[0] * np.sin(f) + x0[1] * np.cos(f))
    c = ML.xb_curve(arc, P.unit_disk(), 100)
    assert np.max(np.abs(c.points - x0)) <= 1e-12


@pytest.mark.parametrize("c", [1.3, 0.65])
def test_xb_sqrt_reversal(c):
    b = 5 * PI / 9
    m = M.sqrt_boundary(4 * PI / 9, b, c)
    curve = ML.xb_curve(m.arcs[0], P.skullish(), 512)
    spacing = curve.phi[1] - curve.phi[0]
    revs = curve.reversal_angles()
    assert len(revs) == 1
    assert abs(revs[0] - (b + 0.5)) <= spacing


def test_xb_rejects_vertical_tangent():
    arc = M.BoundaryArc((1.0, 2.0), lambda f: np.sqrt(np.maximum(f - 1.0, 0)),
                        lambda f: np.where(f > 1.0, 0.5 / np.sqrt(np.maximum(f - 1.0, 1e-300)), np.inf))
    ML.xb_curve(arc, P.unit_disk(), 64)  # open-ended sampling never hits phi = 1
    bad = M.BoundaryArc((1.0, 2.0), lambda f: 0 * f, lambda f: np.full(np.shape(f), np.inf))
    with pytest.raises(ValueError):
        ML.xb_curve(bad, P.unit_disk(), 64)


def test_xb_realized_flags_follow_data():
    # top arc of roi(0.8) with a small disk: realized only where the line meets the disk
    ph = P.Phantom((P.disk((0.0, 0.6), 0.3),))
    top = next(a for a in M.roi(0.8).arcs if a.side == "below")
    c = ML.xb_curve(top, ph, 400)
    ref = np.array([abs(oracles.radon(ph, f, 0.8)) > 1e-12 for f in c.phi])
    assert np.array_equal(c.realized, ref)
    assert c.realized.any() and (~c.realized).any()


@given(st.floats(0.2, 3.0), st.floats(0.1, 1.2))
def test_xb_invariants(c, r):
    for m in (M.sqrt_boundary(4 * PI / 9, 5 * PI / 9, c), M.roi(r)):
        for arc in m.arcs:
            curve = ML.xb_curve(arc, P.unit_disk(), 64)
            th = theta(curve.phi)
            # membership: x_b . theta = p
            assert np.max(np.abs(np.sum(curve.points * th, axis=1) - curve.p)) <= 1e-9
            # generating points on the declared boundary
            assert np.all(m.on_boundary(curve.phi, curve.p))
            # small-slope equivalence where |p| < 1
            sel = np.abs(curve.p) < 1
            norm = np.hypot(*curve.points.T)
            agree = curve.in_region[sel] == ML.small_slope(curve.p[sel], curve.dp[sel])
            near = np.abs(norm[sel] - 1.0) <= 1e-9
            assert np.all(agree | near)
            # ct_project of the arc conormal reproduces the samples
            for phi, p, dp, pt in zip(curve.phi[::8], curve.p[::8], curve.dp[::8], curve.points[::8]):
                x, _ = ML.ct_project(ML.SinoCovector(phi, p, dp))
                assert np.allclose(x, pt, atol=1e-12, rtol=0)


# -- streaks ----------------------------------------------------------------


def _lines(streaks):
    return sorted((round(s.phi, 9), round(s.p, 9)) for s in streaks)


def test_object_streaks_limited_angle_unit_disk():
    got = ML.object_streaks(P.unit_disk(), LIMITED)
    want = sorted((round(f, 9), q) for f in (4 * PI / 9, 5 * PI / 9) for q in (-1.0, 1.0))
    assert _lines(got) == want
    assert all(s.cause == ML.OBJECT_DEPENDENT and s.status == ML.POTENTIAL for s in got)


def test_object_streaks_empty_cases():
    assert ML.object_streaks(P.Phantom(), LIMITED) == []
    assert ML.object_streaks(P.Phantom((P.disk((0.2, 0.0), 0.3),)), M.roi(0.8)) == []
    assert ML.object_streaks(P.unit_disk(), None) == []


def test_object_streaks_roi_tangencies(skull):
    got = ML.object_streaks(skull, M.roi(0.8))
    outer = skull.ellipses[0]
    tag = ML._ellipse_tag(outer)
    on_outer = [s for s in got if any(w.startswith(tag) for w in s.witnesses)]
    assert len(on_outer) == 4
    for s in on_outer:
        hi, lo = oracles.support_branches(outer, s.phi)
        assert min(abs(s.p - hi), abs(s.p - lo)) <= 1e-6
        assert abs(abs(s.p) - 0.8) <= 1e-12


def test_object_streaks_ignore_cancelled_edges():
    d = P.disk((0.0, 0.0), 1.0)
    ph = P.Phantom((d, P.Ellipse(d.center, d.semi_axes, 0.0, -1.0)))
    assert ML.object_streaks(ph, LIMITED) == []


def test_corner_streaks_cutout(skull):
    got = ML.corner_streaks(CUTOUT, skull)
    assert len(got) == 4
    assert all(s.cause == ML.CORNER for s in got)
    assert all(s.status == ML.GUARANTEED for s in got)


def test_corner_outside_support_is_potential():
    m = M.rect_cutout(1.0, 2.0, 1.1, 1.3)
    got = ML.corner_streaks(m, P.unit_disk())
    assert len(got) == 4 and all(s.status == ML.POTENTIAL for s in got)


def test_corner_on_tangent_line_is_potential():
    # corner p = 1 sits on a line tangent to the unit disk
    m = M.rect_cutout(1.0, 2.0, 0.5, 1.0)
    got = {(round(s.phi, 9), s.p): s.status for s in ML.corner_streaks(m, P.unit_disk())}
    assert got[(1.0, 1.0)] == ML.POTENTIAL and got[(2.0, 1.0)] == ML.POTENTIAL
    assert got[(1.0, 0.5)] == ML.GUARANTEED


@given(st.integers(1, 5))
def test_corner_streaks_staircase(n):
    edges = np.linspace(0.2, PI - 0.2, 2 * n + 1)
    steps = [((edges[2 * k], edges[2 * k + 1]), (-0.2, 0.3)) for k in range(n)]
    assert len(ML.corner_streaks(M.staircase(steps), P.unit_disk())) == 4 * n


def test_corner_streaks_raster_are_boundary_nonsmooth():
    g = SinogramGrid(180, 181)
    m = M.from_raster(M.multiplier(CUTOUT, g) > 0, g)
    got = ML.corner_streaks(m, P.skullish())
    assert len(got) == 4
    assert all(s.cause == ML.BOUNDARY_NONSMOOTH and s.status == ML.POTENTIAL for s in got)


def test_streak_chord_and_distance():
    s = ML.StreakLine(0.0, 0.5, ML.CORNER, ML.GUARANTEED)
    a, b = s.chord(1.0)
    assert np.allclose(sorted([a[1], b[1]]), [-1, 1]) and np.allclose([a[0], b[0]], 0.5)
    assert ML.StreakLine(0.0, 1.5, ML.CORNER, ML.GUARANTEED).chord(1.0) is None
    assert s.distance(0.2, 7.0) == pytest.approx(0.3)


# -- predict_all ------------------------------------------------------------


def test_predict_roi_skull(skull):
    pred = ML.predict_all(skull, M.roi(0.8))
    assert len(pred.curves) == 2
    for c in pred.curves:
        assert np.max(np.abs(np.hypot(*c.points.T) - 0.8)) <= 1e-9
    assert len(pred.streaks) == 8  # four on the outer edge of the shell, four on the inner
    assert all(s.cause == ML.OBJECT_DEPENDENT for s in pred.streaks)


def test_predict_limited_angle_no_curves(skull):
    pred = ML.predict_all(skull, LIMITED)
    assert pred.curves == []
    assert pred.streaks


def test_predict_full(skull):
    for m in (None, M.full()):
        pred = ML.predict_all(skull, m, n_wavefront=32)
        assert pred.streaks == [] and pred.curves == [] and not pred.invisible


def test_predict_cutout_dedupes_corners(skull):
    pred = ML.predict_all(skull, CUTOUT)
    corners = [s for s in pred.streaks if s.cause == ML.CORNER]
    assert len(corners) == 4
    for i, a in enumerate(pred.streaks):
        for b in pred.streaks[i + 1:]:
            assert not ML._same_line(a, b)


def test_dedupe_corner_wins():
    a = ML.StreakLine(1.0, 0.5, ML.OBJECT_DEPENDENT, ML.POTENTIAL, ("obj",))
    b = ML.StreakLine(1.0, 0.5, ML.CORNER, ML.GUARANTEED, ("corner",))
    (out,) = ML._dedupe([a, b])
    assert out.cause == ML.CORNER and out.status == ML.GUARANTEED
    assert set(out.witnesses) == {"obj", "corner"}


@pytest.mark.parametrize("m", [LIMITED, CUTOUT, M.roi(0.8), M.sqrt_boundary(4 * PI / 9, 5 * PI / 9, 0.65)],
                         ids=lambda m: m.label)
def test_predict_geometry_on_boundary(skull, m):
    pred = ML.predict_all(skull, m)
    for s in pred.streaks:
        assert m.on_boundary(s.phi, s.p)
    for c in pred.curves:
        assert np.all(m.on_boundary(c.phi, c.p))


def _summary(pred):
    return ([(s.phi, s.p, s.cause, s.status, s.witnesses) for s in pred.streaks],
            [(c.arc_id, c.points.tobytes(), c.realized.tobytes()) for c in pred.curves],
            [(w.x, w.xi) for w in pred.visible], [(w.x, w.xi) for w in pred.invisible])


def test_predict_deterministic_and_order_invariant(skull):
    m = M.staircase([((0.30 * PI, 0.45 * PI), (-0.9, -0.3)), ((0.45 * PI, 0.60 * PI), (-0.5, 0.3))])
    base = _summary(ML.predict_all(skull, m))
    assert _summary(ML.predict_all(skull, m)) == base
    shuffled = P.Phantom(tuple(reversed(skull.ellipses)))
    assert _summary(ML.predict_all(shuffled, m))[:2] == base[:2]
    flipped = replace(m, arcs=tuple(reversed(m.arcs)), verticals=tuple(reversed(m.verticals)),
                      corners=tuple(reversed(m.corners)))
    assert _summary(ML.predict_all(skull, flipped)) == base


def test_predict_apodized_has_no_sharp_geometry(skull):
    pred = ML.predict_all(skull, M.apodize(CUTOUT, 0.05), n_wavefront=32)
    assert pred.streaks == [] and pred.curves == []


# -- decay fits -------------------------------------------------------------


def test_sobolev_errors():
    g = SinogramGrid(256, 256)
    F, Q = g.mesh()
    s = Sinogram(g, (Q > 0).astype(float))
    with pytest.raises(ValueError):
        ML.sobolev_order(s, (PI / 2, 0.0), (0, 1), 0.12, n_levels=4)
    with pytest.raises(ValueError):
        ML.sobolev_order(s, (0.1, 0.0), (0, 1), 0.12)
    with pytest.raises(ValueError):
        ML.sobolev_order(Sinogram.zeros(g), (PI / 2, 0.0), (0, 1), 0.12)
    with pytest.raises(ValueError):
        ML.sobolev_order(s, (PI / 2, 0.0), (0, 1), 0.12, n_levels=8)  # beyond half Nyquist


def test_sobolev_estimate_shape():
    g = SinogramGrid(1024, 1024)
    F, Q = g.mesh()
    s = Sinogram(g, (Q > 0).astype(float))
    sigma = ML.min_window_sigma(g)
    assert 0.14 < sigma < 0.15
    est = ML.sobolev_order(s, (PI / 2, 0.0), ML.SinoCovector(PI / 2, 0.0, 0.0), 0.15)
    with pytest.raises(ValueError):
        ML.sobolev_order(s, (PI / 2, 0.0), (0, 1), 0.98 * sigma)
    assert len(est.radii) == 5 and np.all(np.diff(est.radii) > 0)
    assert est.stderr >= 0 and est.direction == pytest.approx((0.0, 1.0))


# -- artifact energy --------------------------------------------------------


def test_energy_zero_image():
    grid = ImageGrid(64)
    s, b = ML.artifact_energy(Image(grid, np.zeros((64, 64))), ML.StreakLine(0.3, 0.1, "x", "y"))
    assert (s, b) == (0.0, 0.0)
    assert math.isnan(ML.energy_ratio(0.0, 0.0))


def test_energy_positive_control_line():
    grid = ImageGrid(128)
    x, y = grid.mesh()
    line = ML.StreakLine(0.7, 0.2, "x", "y")
    img = Image(grid, (line.distance(x, y) <= grid.h).astype(float))
    s, b = ML.artifact_energy(img, line)
    assert s > 0
    assert b < 0.1 * s


def test_energy_curve_positive_control():
    grid = ImageGrid(128)
    x, y = grid.mesh()
    img = Image(grid, (np.abs(np.hypot(x, y) - 0.5) <= grid.h).astype(float))
    t = np.linspace(0, PI, 200)
    arc = np.column_stack([0.5 * np.cos(t), 0.5 * np.sin(t)])
    s, b = ML.artifact_energy(img, arc)
    assert s > 0 and b < 0.25 * s


def test_energy_errors():
    grid = ImageGrid(64)
    img = Image(grid, np.ones((64, 64)))
    with pytest.raises(ValueError):
        ML.artifact_energy(img, ML.StreakLine(0.3, 1.8, "x", "y"))
    with pytest.raises(ValueError):
        ML.artifact_energy(img, ML.StreakLine(0.3, 0.1, "x", "y"), min_fraction=50.0, max_attempts=20)


def test_energy_seeded():
    grid = ImageGrid(64)
    img = Image(grid, np.random.default_rng(0).normal(size=(64, 64)))
    line = ML.StreakLine(0.3, 0.1, "x", "y")
    assert ML.artifact_energy(img, line, seed=4) == ML.artifact_energy(img, line, seed=4)


def test_curve_runs_and_pieces():
    top = next(a for a in M.roi(0.8).arcs if a.side == "below")
    ph = P.Phantom((P.disk((0.0, 0.6), 0.3),))
    c = ML.xb_curve(top, ph, 400)
    real = ML.curve_runs(c, "realized")
    unreal = ML.curve_runs(c, "unrealized")
    assert sum(len(r) for r in real) == c.realized.sum()
    assert sum(len(r) for r in unreal) <= (~c.realized).sum()
    trimmed = ML.curve_runs(c, "unrealized", margin=0.1)
    edge = np.concatenate(real)
    for run in trimmed:
        d = np.min(np.hypot(*(run[:, None, :] - edge[None, :, :]).transpose(2, 0, 1)), axis=1)
        assert np.all(d >= 0.1)
    pieces = ML.split_runs(real, 0.1)
    for piece in pieces:
        assert np.sum(np.hypot(*np.diff(piece, axis=0).T)) <= 0.1 + 0.02
