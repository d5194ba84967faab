"""File formats.

* Sinogram / image: JSON header plus a companion raw file of little-endian
  float32 samples, row-major. Sinogram headers carry ``n_phi, n_p, p_max``;
  image headers carry ``n, extent``. The header is authoritative.
* Raster mask: same layout with ``kind = "mask"`` and uint8 samples (0/1).
* Renders: 16-bit binary PGM (P5, big-endian). Gray level is
  ``round(65535 * clip((v - lo) / (hi - lo), 0, 1))``; ``lo`` and ``hi`` are
  written into a comment line so the mapping can be inverted.
* Predictions: JSON document plus CSV point lists in image coordinates.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .grids import Image, ImageGrid, Sinogram, SinogramGrid
from .microlocal import ArtifactPrediction, StreakLine

FORMAT_VERSION = 1


class FormatError(ValueError):
    pass


def _raw_path(header_path: Path) -> Path:
    return header_path.with_suffix(".raw")


def _write_pair(path, header: dict, data: np.ndarray) -> Path:
    path = Path(path).with_suffix(".json")
    raw = _raw_path(path)
    header = dict(header, version=FORMAT_VERSION, data=raw.name, byte_order="little")
    data.tofile(raw)
    path.write_text(json.dumps(header, indent=2) + "\n")
    return path


def _read_pair(path, kind: str):
    path = Path(path)
    if path.suffix != ".json":
        path = path.with_suffix(".json")
    try:
        header = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise FormatError(f"{path}: bad header: {err}") from err
    if header.get("kind") != kind:
        raise FormatError(f"{path}: expected kind {kind!r}, found {header.get('kind')!r}")
    raw = path.parent / header.get("data", _raw_path(path).name)
    dtype = {"sinogram": "<f4", "image": "<f4", "mask": "u1"}[kind]
    data = np.fromfile(raw, dtype=dtype)
    return header, data


def write_sinogram(path, s: Sinogram) -> Path:
    g = s.grid
    head = {"kind": "sinogram", "n_phi": g.n_phi, "n_p": g.n_p, "p_max": g.p_max, "dtype": "float32"}
    return _write_pair(path, head, s.values.astype("<f4"))


def read_sinogram(path) -> Sinogram:
    head, data = _read_pair(path, "sinogram")
    grid = SinogramGrid(int(head["n_phi"]), int(head["n_p"]), float(head["p_max"]))
    if data.size != grid.n_phi * grid.n_p:
        raise FormatError(f"sinogram raw has {data.size} samples, header declares {grid.n_phi}x{grid.n_p}")
    return Sinogram(grid, data.astype(float).reshape(grid.n_phi, grid.n_p))


def write_image(path, img: Image) -> Path:
    head = {"kind": "image", "n": img.grid.n, "extent": img.grid.extent, "dtype": "float32"}
    return _write_pair(path, head, img.values.astype("<f4"))


def read_image(path) -> Image:
    head, data = _read_pair(path, "image")
    grid = ImageGrid(int(head["n"]), float(head["extent"]))
    if data.size != grid.n * grid.n:
        raise FormatError(f"image raw has {data.size} samples, header declares {grid.n}x{grid.n}")
    return Image(grid, data.astype(float).reshape(grid.n, grid.n))


def write_raster_mask(path, values: np.ndarray, grid: SinogramGrid) -> Path:
    values = np.asarray(values)
    if values.shape != (grid.n_phi, grid.n_p):
        raise FormatError(f"mask shape {values.shape} does not match grid {grid.n_phi}x{grid.n_p}")
    head = {"kind": "mask", "n_phi": grid.n_phi, "n_p": grid.n_p, "p_max": grid.p_max, "dtype": "uint8"}
    return _write_pair(path, head, (values != 0).astype("u1"))


def read_raster_mask(path) -> tuple[np.ndarray, SinogramGrid]:
    head, data = _read_pair(path, "mask")
    grid = SinogramGrid(int(head["n_phi"]), int(head["n_p"]), float(head["p_max"]))
    if data.size != grid.n_phi * grid.n_p:
        raise FormatError(f"mask raw has {data.size} samples, header declares {grid.n_phi}x{grid.n_p}")
    return data.reshape(grid.n_phi, grid.n_p).astype(bool), grid


# -- renders ----------------------------------------------------------------


def write_pgm(path, values: np.ndarray, lo: float | None = None, hi: float | None = None) -> Path:
    """16-bit P5 render; rows are written top to bottom, so image rows (y up) are flipped."""
    values = np.asarray(values, dtype=float)
    lo = float(values.min()) if lo is None else float(lo)
    hi = float(values.max()) if hi is None else float(hi)
    span = hi - lo if hi > lo else 1.0
    gray = np.round(65535.0 * np.clip((values - lo) / span, 0.0, 1.0)).astype(">u2")
    path = Path(path)
    rows, cols = gray.shape
    head = f"P5\n# gray = 65535*(v-lo)/(hi-lo) lo={lo!r} hi={hi!r}\n{cols} {rows}\n65535\n".encode("ascii")
    path.write_bytes(head + gray.tobytes())
    return path


def read_pgm(path) -> tuple[np.ndarray, float, float]:
    """Pixel levels (as written) and the ``lo, hi`` of the gray mapping."""
    blob = Path(path).read_bytes()
    tokens, comments, pos = [], [], 0
    while len(tokens) < 4:
        while blob[pos:pos + 1].isspace():
            pos += 1
        if blob[pos:pos + 1] == b"#":
            end = blob.index(b"\n", pos)
            comments.append(blob[pos + 1:end].decode("ascii"))
            pos = end + 1
            continue
        end = pos
        while not blob[end:end + 1].isspace():
            end += 1
        tokens.append(blob[pos:end].decode("ascii"))
        pos = end
    pos += 1
    if tokens[0] != "P5":
        raise FormatError("not a binary PGM")
    cols, rows, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    dtype = ">u2" if maxval > 255 else "u1"
    gray = np.frombuffer(blob[pos:], dtype=dtype, count=rows * cols).reshape(rows, cols)
    lo = hi = math.nan
    for c in comments:
        for part in c.split():
            if part.startswith("lo="):
                lo = float(part[3:])
            elif part.startswith("hi="):
                hi = float(part[3:])
    return gray, lo, hi


def render_image(path, img: Image, lo=None, hi=None) -> Path:
    return write_pgm(path, img.values[::-1], lo, hi)


def render_sinogram(path, s: Sinogram, lo=None, hi=None) -> Path:
    # p runs down the rows and phi across the columns, as sinograms are usually shown
    return write_pgm(path, s.values.T[::-1], lo, hi)


# -- predictions ------------------------------------------------------------


def _wf_doc(elems):
    return [{"x": list(w.x), "xi": list(w.xi), "jump": w.jump} for w in elems]


def prediction_to_dict(pred: ArtifactPrediction) -> dict:
    return {
        "streaks": [
            {"id": i, "phi": s.phi, "p": s.p, "cause": s.cause, "status": s.status, "witnesses": list(s.witnesses)}
            for i, s in enumerate(pred.streaks)
        ],
        "curves": [
            {
                "arc_id": c.arc_id,
                "label": c.arc.label,
                "phi": c.phi.tolist(),
                "points": c.points.tolist(),
                "realized": c.realized.tolist(),
                "in_region": c.in_region.tolist(),
            }
            for c in pred.curves
        ],
        "visible": _wf_doc(pred.visible),
        "invisible": _wf_doc(pred.invisible),
        "boundary_cases": _wf_doc(pred.boundary_cases),
    }


def write_prediction(out_dir, pred: ArtifactPrediction, extent: float = 1.0, overlays: bool = True) -> list[Path]:
    """``prediction.json`` plus one CSV per streak (chord endpoints) and per curve (sampled points)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = prediction_to_dict(pred)
    written = [out_dir / "prediction.json"]
    written[0].write_text(json.dumps(doc, indent=1) + "\n")
    if not overlays:
        return written
    for i, s in enumerate(pred.streaks):
        chord = s.chord(extent)
        path = out_dir / f"streak_{i:02d}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y", "cause", "status"])
            if chord is not None:
                for pt in chord:
                    w.writerow([repr(float(pt[0])), repr(float(pt[1])), s.cause, s.status])
        written.append(path)
    for c in pred.curves:
        path = out_dir / f"curve_{c.arc_id:02d}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["phi", "x", "y", "realized", "in_region"])
            for phi, pt, r, inside in zip(c.phi, c.points, c.realized, c.in_region):
                w.writerow([repr(float(phi)), repr(float(pt[0])), repr(float(pt[1])), int(r), int(inside)])
        written.append(path)
    return written


def read_prediction(path) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / "prediction.json"
    return json.loads(path.read_text())


def streaks_from_doc(doc: dict) -> list[StreakLine]:
    return [StreakLine(s["phi"], s["p"], s["cause"], s["status"], tuple(s.get("witnesses", ()))) for s in doc["streaks"]]


def curve_points_from_doc(doc: dict) -> list[tuple[int, np.ndarray, np.ndarray]]:
    """``(arc_id, points, realized)`` per curve."""
    return [(c["arc_id"], np.asarray(c["points"], dtype=float).reshape(-1, 2), np.asarray(c["realized"], dtype=bool))
            for c in doc["curves"]]


METRIC_FIELDS = ["geometry", "cause", "status", "signal", "background", "ratio", "seed"]


def write_metrics(path, rows: list[dict]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=METRIC_FIELDS)
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return path


def read_metrics(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        for k in ("signal", "background", "ratio"):
            r[k] = float(r[k])
        r["seed"] = int(r["seed"])
    return rows
