"""Tomography artifact laboratory: ellipse phantoms, masked filtered backprojection and artifact prediction."""

from .fbp import backproject, lambda_filter, l2_error, reconstruct
from .grids import GridMismatchError, Image, ImageGrid, Sinogram, SinogramGrid
from .mask import InvalidMaskError, Mask, apodize, apply, validate
from .microlocal import (
    ArtifactPrediction,
    SinoCovector,
    SobolevEstimate,
    StreakLine,
    XbCurve,
    artifact_energy,
    classify_singularities,
    corner_streaks,
    ct_project,
    object_streaks,
    min_window_sigma,
    predict_all,
    sobolev_order,
    xb_curve,
)
from .phantom import Ellipse, Phantom, radon, rasterize, shepp_logan, simulate_sinogram, skullish, unit_disk

__version__ = "0.1.0"
