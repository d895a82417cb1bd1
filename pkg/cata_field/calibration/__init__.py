"""Calibration module: camera pose relative to the mirror-array plane."""

from .homography import Correspondence, Homography, estimate_homography
from .pose import (
    CameraCalibration,
    calibrate,
    decompose_homography,
    load_correspondences,
    orthogonalize,
    save_correspondences,
)

__all__ = [
    "Correspondence",
    "Homography",
    "estimate_homography",
    "CameraCalibration",
    "calibrate",
    "decompose_homography",
    "load_correspondences",
    "orthogonalize",
    "save_correspondences",
]
