"""Command-line front end.

Every command reads an experiment config (JSON), optionally overridden by
flags, and writes its products into ``--out``::

    {
      "phantom": "skullish",                     # name, ellipse document, or path to one
      "mask": {"kind": "roi", "r": 0.8},         # document, shorthand string, or path
      "sinogram_grid": {"n_phi": 512, "n_p": 512, "p_max": 1.4142135623730951},
      "image_grid": {"n": 256, "extent": 1.0},
      "apodize_delta": null,                     # physical width, or {"bins": 3}
      "apodize_profile": "smooth",
      "window": "ramp",
      "outputs": ["sinogram", "image", "prediction", "overlay", "metrics"]
    }

Each command always writes its main product. ``outputs`` controls the side
products: ``sinogram`` and ``image`` add PGM renders, ``overlay`` adds the
per-geometry CSV point lists next to the prediction.

Exit codes: 0 success, 2 configuration or mask error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io as ctio
from .fbp import reconstruct
from .grids import GridMismatchError, ImageGrid, Sinogram, SinogramGrid, require_same_grid
from .mask import (
    ApodizedMask,
    InvalidMaskError,
    Mask,
    apodize,
    apply,
    eval_angle,
    full,
    mask_from_spec,
    parse_shorthand,
    validate,
)
from .microlocal import (
    SinoCovector,
    XbCurve,
    artifact_energy,
    curve_runs,
    energy_ratio,
    min_window_sigma,
    predict_all,
    sobolev_order,
)
from .phantom import Phantom, phantom_from_spec, simulate_sinogram

log = logging.getLogger("ctlab")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


class NumericalFailure(RuntimeError):
    pass


CONFIG_KEYS = {"phantom", "mask", "sinogram_grid", "image_grid", "apodize_delta", "apodize_profile", "window",
               "outputs", "measure", "sobolev", "name", "description"}
OUTPUTS = {"sinogram", "image", "prediction", "overlay", "metrics"}


@dataclass
class ExperimentConfig:
    phantom: Phantom
    mask: Mask | None
    sinogram_grid: SinogramGrid
    image_grid: ImageGrid
    apodize_delta: float | None = None
    apodize_profile: str = "smooth"
    window: str = "ramp"
    outputs: list[str] = field(default_factory=lambda: sorted(OUTPUTS))
    measure: dict = field(default_factory=dict)
    sobolev: dict = field(default_factory=dict)

    def multiplier(self) -> Mask | ApodizedMask | None:
        if self.mask is None:
            return None
        if self.apodize_delta is None:
            return self.mask
        return apodize(self.mask, self.apodize_delta, self.apodize_profile)


def _load_json_or_path(value, base: Path):
    if isinstance(value, str) and value.endswith(".json"):
        path = (base / value) if not Path(value).is_absolute() else Path(value)
        try:
            return json.loads(path.read_text())
        except OSError:
            raise
        except json.JSONDecodeError as err:
            raise ConfigError(f"{path}: {err}") from err
    return value


def _mask_from_value(value, base: Path) -> Mask | None:
    if value is None:
        return None
    value = _load_json_or_path(value, base)
    if isinstance(value, str):
        value = parse_shorthand(value)

    def loader(ref):
        path = Path(ref) if Path(ref).is_absolute() else base / ref
        return ctio.read_raster_mask(path)

    m = mask_from_spec(value, raster_loader=loader)
    return None if m.is_full else m


def _delta(value, grid: SinogramGrid) -> float | None:
    if value is None:
        return None
    if isinstance(value, dict):
        if set(value) != {"bins"}:
            raise ConfigError("apodize_delta as an object takes exactly {'bins': k}")
        return float(value["bins"]) * grid.dp
    return float(value)


def load_config(path: str | None, overrides: argparse.Namespace) -> ExperimentConfig:
    doc: dict = {}
    base = Path.cwd()
    if path:
        p = Path(path)
        doc = json.loads(p.read_text())
        base = p.parent
        extra = set(doc) - CONFIG_KEYS
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
    phantom_doc = getattr(overrides, "phantom", None) or doc.get("phantom", "skullish")
    phantom = phantom_from_spec(_load_json_or_path(phantom_doc, base))
    sg = doc.get("sinogram_grid", {})
    ig = doc.get("image_grid", {})
    sgrid = SinogramGrid(int(_pick(overrides, "n_phi", sg, 512)), int(_pick(overrides, "n_p", sg, 512)),
                         float(_pick(overrides, "p_max", sg, math.sqrt(2.0))))
    igrid = ImageGrid(int(_pick(overrides, "n", ig, 256)), float(_pick(overrides, "extent", ig, 1.0)))
    mask_value = getattr(overrides, "mask", None) or doc.get("mask")
    mask = _mask_from_value(mask_value, base)
    delta_value = getattr(overrides, "apodize", None)
    delta = float(delta_value) if delta_value is not None else _delta(doc.get("apodize_delta"), sgrid)
    outputs = list(doc.get("outputs", sorted(OUTPUTS)))
    bad = set(outputs) - OUTPUTS
    if bad:
        raise ConfigError(f"unknown outputs: {sorted(bad)}")
    window = getattr(overrides, "window", None) or doc.get("window", "ramp")
    if window not in ("ramp", "hann"):
        raise ConfigError(f"unknown window {window!r}")
    return ExperimentConfig(phantom, mask, sgrid, igrid, delta, doc.get("apodize_profile", "smooth"), window,
                            outputs, dict(doc.get("measure", {})), dict(doc.get("sobolev", {})))


def _pick(ns, name, doc, default):
    v = getattr(ns, name, None)
    if v is not None:
        return v
    return doc.get(name, default)


# -- commands ---------------------------------------------------------------


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _sinogram(cfg: ExperimentConfig, args) -> Sinogram:
    path = getattr(args, "sinogram", None)
    if path:
        s = ctio.read_sinogram(path)
        log.info("read sinogram %s", path)
        return s
    return simulate_sinogram(cfg.phantom, cfg.sinogram_grid, workers=args.threads)


def cmd_simulate(cfg: ExperimentConfig, args) -> int:
    out = _out(args)
    s = simulate_sinogram(cfg.phantom, cfg.sinogram_grid, workers=args.threads)
    mult = cfg.multiplier()
    if mult is not None:
        s = apply(mult, s)
    path = ctio.write_sinogram(out / "sinogram", s)
    if "sinogram" in cfg.outputs:
        ctio.render_sinogram(out / "sinogram.pgm", s)
    print(path)
    return EXIT_OK


def cmd_reconstruct(cfg: ExperimentConfig, args) -> int:
    out = _out(args)
    s = _sinogram(cfg, args)
    if getattr(args, "sinogram", None) is None:
        require_same_grid(s.grid, cfg.sinogram_grid)
    img = reconstruct(s, cfg.multiplier(), cfg.image_grid, window=cfg.window, workers=args.threads)
    if not np.all(np.isfinite(img.values)):
        raise NumericalFailure("reconstruction produced non-finite values")
    path = ctio.write_image(out / "image", img)
    if "image" in cfg.outputs:
        ctio.render_image(out / "image.pgm", img)
    print(path)
    return EXIT_OK


def cmd_predict(cfg: ExperimentConfig, args) -> int:
    out = _out(args) / "prediction"
    pred = predict_all(cfg.phantom, cfg.mask, region_radius=cfg.image_grid.extent)
    written = ctio.write_prediction(out, pred, cfg.image_grid.extent, overlays="overlay" in cfg.outputs)
    print(f"{len(pred.streaks)} streaks, {len(pred.curves)} curves, {len(pred.visible)} visible, "
          f"{len(pred.invisible)} invisible, {len(pred.boundary_cases)} boundary -> {written[0]}")
    return EXIT_OK


def _curve_from_doc(doc: dict) -> XbCurve:
    phi = np.asarray(doc["phi"], dtype=float)
    nan = np.full(phi.shape, np.nan)
    return XbCurve(None, int(doc["arc_id"]), phi, nan, nan, np.asarray(doc["points"], dtype=float).reshape(-1, 2),
                   np.asarray(doc["realized"], dtype=bool), np.asarray(doc["in_region"], dtype=bool))


def measure_rows(cfg: ExperimentConfig, img, pred_doc: dict, seed: int) -> list[dict]:
    opts = {"half_width": 2.0, "n_controls": 16, "margin_px": 8.0}
    opts.update(cfg.measure)
    half_width = float(opts["half_width"])
    n_controls = int(opts["n_controls"])
    margin = float(opts["margin_px"]) * img.grid.h
    streaks = ctio.streaks_from_doc(pred_doc)
    curves = [_curve_from_doc(c) for c in pred_doc["curves"]]
    geoms: list[tuple[str, str, str, object]] = []
    for i, st in enumerate(streaks):
        geoms.append((f"streak_{i:02d}", st.cause, st.status, st))
    for c in curves:
        for which in ("realized", "unrealized"):
            runs = curve_runs(c, which, margin=margin, avoid=streaks)
            if runs:
                geoms.append((f"curve_{c.arc_id:02d}_{which}", "x_b", which, runs))
    everything = [g for *_, g in geoms] + [c.points for c in curves]
    rows = []
    for gid, cause, status, g in geoms:
        others = [o for o in everything if o is not g]
        try:
            sig, bg = artifact_energy(img, g, half_width, cfg.phantom, exclude=others, n_controls=n_controls, seed=seed)
        except ValueError as err:
            log.warning("%s: %s", gid, err)
            continue
        rows.append({"geometry": gid, "cause": cause, "status": status, "signal": sig, "background": bg,
                     "ratio": energy_ratio(sig, bg), "seed": seed})
    return rows


def cmd_measure(cfg: ExperimentConfig, args) -> int:
    out = _out(args)
    if args.prediction:
        doc = ctio.read_prediction(args.prediction)
    else:
        doc = ctio.prediction_to_dict(predict_all(cfg.phantom, cfg.mask, region_radius=cfg.image_grid.extent))
    if args.image:
        img = ctio.read_image(args.image)
    else:
        s = simulate_sinogram(cfg.phantom, cfg.sinogram_grid, workers=args.threads)
        img = reconstruct(s, cfg.multiplier(), cfg.image_grid, window=cfg.window, workers=args.threads)
    rows = measure_rows(cfg, img, doc, args.seed)
    path = ctio.write_metrics(out / "metrics.csv", rows)
    for r in rows:
        print(f"{r['geometry']:28s} {r['cause']:16s} {r['status']:11s} ratio={r['ratio']:.3f}")
    print(path)
    return EXIT_OK


def cmd_sobolev(cfg: ExperimentConfig, args) -> int:
    out = _out(args)
    s = _sinogram(cfg, args)
    mult = cfg.multiplier()
    if mult is not None and not args.unmasked:
        s = apply(mult, s)
    alpha = math.inf if args.vertical else float(args.alpha)
    cov = SinoCovector(eval_angle(args.phi), float(args.p), alpha)
    sigma = args.sigma if args.sigma is not None else cfg.sobolev.get("sigma")
    if sigma is None:
        # a little above the smallest width the grid resolves
        sigma = 1.05 * min_window_sigma(s.grid, args.levels)
    try:
        est = sobolev_order(s, (cov.phi, cov.p), cov, float(sigma), n_levels=args.levels)
    except ValueError as err:
        raise NumericalFailure(str(err)) from err
    doc = {"sigma": float(sigma), "location": list(est.location), "direction": list(est.direction), "exponent": est.exponent,
           "stderr": est.stderr, "radii": est.radii.tolist(), "magnitudes": est.magnitudes.tolist()}
    (out / "sobolev.json").write_text(json.dumps(doc, indent=2) + "\n")
    print(f"exponent {est.exponent:.4f} +- {est.stderr:.4f}")
    return EXIT_OK


def cmd_validate_mask(cfg: ExperimentConfig, args) -> int:
    m = cfg.mask if cfg.mask is not None else full()
    report = validate(m)
    print(report.summary())
    return EXIT_OK if report.passed else EXIT_CONFIG


COMMANDS = {
    "simulate": cmd_simulate,
    "reconstruct": cmd_reconstruct,
    "predict": cmd_predict,
    "measure": cmd_measure,
    "sobolev": cmd_sobolev,
    "validate-mask": cmd_validate_mask,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="experiment config (JSON)")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker cap")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="seed for control-tube placement")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    scen = argparse.ArgumentParser(add_help=False)
    scen.add_argument("--phantom", help="built-in name or phantom JSON file")
    scen.add_argument("--mask", help="shorthand such as roi:0.8 or limited_angle:4pi/9,5pi/9, or a mask JSON file")
    scen.add_argument("--apodize", type=float, help="smooth the mask edge over this width")
    scen.add_argument("--n-phi", dest="n_phi", type=int)
    scen.add_argument("--n-p", dest="n_p", type=int)
    scen.add_argument("--p-max", dest="p_max", type=float)
    scen.add_argument("--n", type=int, help="image size in pixels")
    scen.add_argument("--extent", type=float)
    scen.add_argument("--window", choices=["ramp", "hann"])

    parser = argparse.ArgumentParser(prog="ctlab", description="Tomography artifact laboratory.", parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common, scen], help="write the (masked) sinogram")
    p = sub.add_parser("reconstruct", parents=[common, scen], help="filtered backprojection")
    p.add_argument("--sinogram", help="read this sinogram instead of simulating")
    sub.add_parser("predict", parents=[common, scen], help="predict streaks, x_b curves and visibility")
    p = sub.add_parser("measure", parents=[common, scen], help="tube-energy ratios on predicted geometry")
    p.add_argument("--prediction", help="prediction.json (default: predict from the config)")
    p.add_argument("--image", help="image header (default: reconstruct from the config)")
    p = sub.add_parser("sobolev", parents=[common, scen], help="windowed Fourier decay rate of the sinogram")
    p.add_argument("--sinogram")
    p.add_argument("--phi", required=True)
    p.add_argument("--p", type=float, required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--alpha", type=float, default=0.0, help="covector slope (direction -alpha dphi + dp)")
    g.add_argument("--vertical", action="store_true", help="use the dphi direction")
    p.add_argument("--sigma", type=float, help="window width (default: config, else the finest the grid allows)")
    p.add_argument("--levels", type=int, default=5)
    p.add_argument("--unmasked", action="store_true", help="do not apply the config mask first")
    sub.add_parser("validate-mask", parents=[common, scen], help="check the mask assumptions")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for name, default in (("config", None), ("out", "out"), ("threads", 1), ("seed", 0), ("verbose", False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config, args)
        return COMMANDS[args.command](cfg, args)
    except (InvalidMaskError, GridMismatchError, ConfigError, ctio.FormatError, KeyError, TypeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (FloatingPointError, ArithmeticError, np.linalg.LinAlgError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
