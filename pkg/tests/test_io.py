import json
import math

import numpy as np
import pytest

from ctlab import io as ctio
from ctlab import mask as M
from ctlab import microlocal as ML
from ctlab import phantom as P
from ctlab.grids import Image, ImageGrid, Sinogram, SinogramGrid


def test_sinogram_roundtrip(tmp_path):
    g = SinogramGrid(12, 17, 1.3)
    vals = np.random.default_rng(0).normal(size=(12, 17))
    path = ctio.write_sinogram(tmp_path / "s", Sinogram(g, vals))
    head = json.loads(path.read_text())
    assert head["kind"] == "sinogram" and head["n_phi"] == 12 and head["n_p"] == 17
    assert (tmp_path / head["data"]).stat().st_size == 12 * 17 * 4
    back = ctio.read_sinogram(path)
    assert back.grid == g
    assert np.array_equal(back.values, vals.astype("<f4").astype(float))


def test_raw_is_little_endian_row_major(tmp_path):
    g = SinogramGrid(2, 3)
    vals = np.arange(6.0).reshape(2, 3)
    path = ctio.write_sinogram(tmp_path / "s", Sinogram(g, vals))
    raw = (tmp_path / json.loads(path.read_text())["data"]).read_bytes()
    assert np.array_equal(np.frombuffer(raw, dtype="<f4"), np.arange(6.0, dtype="<f4"))


def test_image_roundtrip_and_header_authority(tmp_path):
    grid = ImageGrid(8, 0.5)
    vals = np.random.default_rng(1).normal(size=(8, 8))
    path = ctio.write_image(tmp_path / "img", Image(grid, vals))
    back = ctio.read_image(path)
    assert back.grid == grid and np.allclose(back.values, vals, atol=1e-6)
    head = json.loads(path.read_text())
    head["n"] = 9
    path.write_text(json.dumps(head))
    with pytest.raises(ctio.FormatError):
        ctio.read_image(path)


def test_wrong_kind_and_bad_json(tmp_path):
    path = ctio.write_image(tmp_path / "img", Image(ImageGrid(4), np.zeros((4, 4))))
    with pytest.raises(ctio.FormatError):
        ctio.read_sinogram(path)
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ctio.FormatError):
        ctio.read_image(tmp_path / "bad.json")


def test_raster_mask_roundtrip(tmp_path):
    g = SinogramGrid(10, 11)
    vals = np.random.default_rng(2).random((10, 11)) > 0.5
    path = ctio.write_raster_mask(tmp_path / "m", vals, g)
    back, grid = ctio.read_raster_mask(path)
    assert grid == g and np.array_equal(back, vals)
    with pytest.raises(ctio.FormatError):
        ctio.write_raster_mask(tmp_path / "m", vals[:-1], g)


def test_pgm_mapping(tmp_path):
    vals = np.array([[0.0, 0.5], [1.0, 2.0]])
    path = ctio.write_pgm(tmp_path / "a.pgm", vals, lo=0.0, hi=1.0)
    assert path.read_bytes().startswith(b"P5\n")
    gray, lo, hi = ctio.read_pgm(path)
    assert (lo, hi) == (0.0, 1.0)
    assert gray.tolist() == [[0, round(65535 * 0.5)], [65535, 65535]]
    assert gray.dtype == np.dtype(">u2")


def test_render_orientation(tmp_path):
    grid = ImageGrid(4)
    vals = np.zeros((4, 4))
    vals[3, 0] = 1.0  # top-left in the y-up picture
    ctio.render_image(tmp_path / "i.pgm", Image(grid, vals))
    gray, lo, hi = ctio.read_pgm(tmp_path / "i.pgm")
    assert gray[0, 0] == 65535 and gray.sum() == 65535
    g = SinogramGrid(3, 5)
    sv = np.zeros((3, 5))
    sv[0, 4] = 1.0  # first view, largest p
    ctio.render_sinogram(tmp_path / "s.pgm", Sinogram(g, sv))
    gray, _, _ = ctio.read_pgm(tmp_path / "s.pgm")
    assert gray.shape == (5, 3) and gray[0, 0] == 65535


def test_prediction_files(tmp_path):
    pred = ML.predict_all(P.skullish(), M.roi(0.8))
    written = ctio.write_prediction(tmp_path, pred)
    names = sorted(p.name for p in written)
    assert "prediction.json" in names
    assert sum(n.startswith("streak_") for n in names) == len(pred.streaks)
    assert sum(n.startswith("curve_") for n in names) == 2
    doc = ctio.read_prediction(tmp_path)
    back = ctio.streaks_from_doc(doc)
    assert [(s.phi, s.p, s.cause, s.status) for s in back] == [(s.phi, s.p, s.cause, s.status) for s in pred.streaks]
    for arc_id, pts, realized in ctio.curve_points_from_doc(doc):
        assert np.max(np.abs(np.hypot(*pts.T) - 0.8)) <= 1e-9
    rows = (tmp_path / "curve_00.csv").read_text().splitlines()
    assert rows[0] == "phi,x,y,realized,in_region"
    x, y = map(float, rows[1].split(",")[1:3])
    assert math.hypot(x, y) == pytest.approx(0.8, abs=1e-12)
    only = ctio.write_prediction(tmp_path / "bare", pred, overlays=False)
    assert [p.name for p in only] == ["prediction.json"]


def test_metrics_roundtrip(tmp_path):
    rows = [{"geometry": "streak_00", "cause": "corner", "status": "guaranteed", "signal": 0.1,
             "background": 0.02, "ratio": 5.000000000000001, "seed": 7}]
    path = ctio.write_metrics(tmp_path / "m.csv", rows)
    assert ctio.read_metrics(path) == rows
