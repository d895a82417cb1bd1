"""
Camera pose recovery from a plane-to-image homography.

The homography of a planar pattern factors as H ∝ K [r1 r2 t]. Removing K,
rescaling by the norm of the first column, completing the rotation with
r1 x r2 and projecting onto SO(3) yields the extrinsics.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..errors import DataError, GeometryError, NumericalError
from ..geometry import CameraIntrinsics, Pose, project_points
from .homography import Correspondence, Homography, estimate_homography, split_correspondences

logger = logging.getLogger(__name__)

SINGULAR_RATIO = 1e-12


@dataclass(frozen=True)
class CameraCalibration:
    """Intrinsics plus recovered world-to-camera extrinsics."""

    K: CameraIntrinsics
    R: np.ndarray
    t: np.ndarray
    rmse_px: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "R", np.asarray(self.R, dtype=np.float64).reshape(3, 3).copy())
        object.__setattr__(self, "t", np.asarray(self.t, dtype=np.float64).reshape(3).copy())

    @classmethod
    def from_pose(cls, K: CameraIntrinsics, pose: Pose, rmse_px: Optional[float] = None) -> "CameraCalibration":
        """Wrap a known pose (e.g. the simulator's ground truth)."""
        return cls(K=K, R=pose.R, t=pose.t, rmse_px=rmse_px)

    @property
    def pose(self) -> Pose:
        """Extrinsics as a :class:`Pose`."""
        return Pose(self.R, self.t)

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.R.T @ self.t

    def reprojection_rmse(self, pairs: Sequence[Correspondence]) -> float:
        """RMSE in pixels between projected world points and observed pixels."""
        plane, pixels = split_correspondences(pairs)
        world = np.hstack([plane, np.zeros((plane.shape[0], 1))])
        projected = project_points(self.K, self.pose, world)
        return float(np.sqrt(np.mean(np.sum((projected - pixels) ** 2, axis=1))))

    def to_dict(self) -> dict:
        """Convert to the calibration JSON layout.

        Returns:
            dict: ``{K: {...}, R: 9 numbers row-major, t: 3 numbers, rmse_px}``.
        """
        return {
            "K": self.K.to_dict(),
            "R": self.R.reshape(-1).tolist(),
            "t": self.t.tolist(),
            "rmse_px": self.rmse_px,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CameraCalibration":
        """Inverse of :meth:`to_dict`."""
        try:
            R = np.array(data["R"], dtype=np.float64).reshape(3, 3)
            t = np.array(data["t"], dtype=np.float64).reshape(3)
            rmse = data.get("rmse_px")
            return cls(
                K=CameraIntrinsics.from_dict(data["K"]),
                R=R,
                t=t,
                rmse_px=None if rmse is None else float(rmse),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise DataError(f"malformed calibration document: {e}") from e

    def save(self, path: str) -> None:
        """Write the calibration JSON document."""
        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")

    @classmethod
    def load(cls, path: str) -> "CameraCalibration":
        """Read a calibration JSON document."""
        p = Path(path)
        if not p.exists():
            raise FileNotFoundError(f"Calibration file not found: {path}")
        return cls.from_dict(json.loads(p.read_text(encoding="utf-8")))


def orthogonalize(R_prime: np.ndarray) -> np.ndarray:
    """Nearest rotation (Frobenius norm) to a nonsingular 3x3 matrix.

    Args:
        R_prime: Approximate rotation.

    Returns:
        np.ndarray: U Vᵀ from the SVD R' = U Σ Vᵀ, with the last singular
            direction flipped when needed so that det = +1.

    Raises:
        NumericalError: If R_prime is singular.
    """
    R_prime = np.asarray(R_prime, dtype=np.float64).reshape(3, 3)
    U, s, Vt = np.linalg.svd(R_prime)
    if s[0] == 0 or s[-1] / s[0] < SINGULAR_RATIO:
        raise NumericalError(f"cannot orthogonalize a singular matrix (singular values {s})")
    R = U @ Vt
    if np.linalg.det(R) < 0:
        D = np.diag([1.0, 1.0, -1.0])
        R = U @ D @ Vt
    return R


def decompose_homography(
    H: Homography,
    K: CameraIntrinsics,
    pairs: Optional[Sequence[Correspondence]] = None,
) -> CameraCalibration:
    """Recover [R | t] from a plane-to-image homography.

    M = K⁻¹ H is scaled by 1 / ‖m1‖ so that r1 has unit length; the global
    sign is chosen so that the pattern lies in front of the camera (mean
    depth of the pattern points, or the pattern origin when no pairs are
    given). r2 is kept as is before completing R' = [r1, r2, r1 x r2], which
    is then projected onto SO(3).

    Args:
        H: Estimated homography.
        K: Pre-calibrated intrinsics.
        pairs: Optional correspondences, used for the sign test and to report
            the reprojection RMSE.

    Returns:
        CameraCalibration: Pose and, when pairs are given, the RMSE.

    Raises:
        NumericalError: If the first column of K⁻¹H is (near) zero.
    """
    M = K.K_inv @ H.H
    norm1 = float(np.linalg.norm(M[:, 0]))
    if norm1 < 1e-9:
        raise NumericalError(f"first column of K^-1 H is degenerate (norm {norm1:.3e})")
    M = M / norm1

    if pairs:
        plane, _ = split_correspondences(pairs)
        depth = M[2, 0] * plane[:, 0] + M[2, 1] * plane[:, 1] + M[2, 2]
        mean_depth = float(np.mean(depth))
    else:
        mean_depth = float(M[2, 2])
    if mean_depth < 0:
        M = -M

    r1, r2, t = M[:, 0], M[:, 1], M[:, 2]
    R_prime = np.column_stack([r1, r2, np.cross(r1, r2)])
    R = orthogonalize(R_prime)

    calib = CameraCalibration(K=K, R=R, t=t)
    if pairs:
        try:
            rmse = calib.reprojection_rmse(pairs)
        except GeometryError as e:
            raise NumericalError(f"recovered pose places calibration points behind the camera: {e}") from e
        calib = CameraCalibration(K=K, R=R, t=t, rmse_px=rmse)
    return calib


def calibrate(pairs: Sequence[Correspondence], K: CameraIntrinsics) -> CameraCalibration:
    """Full online calibration: DLT homography, decomposition and RMSE.

    Args:
        pairs: Marker correspondences on the array plane.
        K: Pre-calibrated intrinsics.

    Returns:
        CameraCalibration: Recovered calibration with reprojection RMSE.
    """
    H = estimate_homography(pairs)
    calib = decompose_homography(H, K, pairs)
    logger.info("calibrated from %d markers, reprojection RMSE %.4g px", len(pairs), calib.rmse_px)
    return calib


def load_correspondences(path: str) -> list[Correspondence]:
    """Read ``{"points": [{"world": [...], "pixel": [...]}, ...]}``."""
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"Correspondence file not found: {path}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
        return [Correspondence.from_dict(item) for item in data["points"]]
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as e:
        raise DataError(f"malformed correspondence file {path}: {e}") from e


def save_correspondences(pairs: Sequence[Correspondence], path: str) -> None:
    """Write correspondences in the layout read by :func:`load_correspondences`."""
    Path(path).write_text(
        json.dumps({"points": [p.to_dict() for p in pairs]}, indent=2), encoding="utf-8"
    )
