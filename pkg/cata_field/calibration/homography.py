"""
Plane-to-image homography estimation (normalized DLT).
"""

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import DataError, DegenerateConfigurationError

logger = logging.getLogger(__name__)

MIN_CORRESPONDENCES = 4


@dataclass(frozen=True)
class Correspondence:
    """A marker with known position on the array plane and its image location."""

    world: tuple[float, float, float]
    pixel: tuple[float, float]

    def __post_init__(self):
        world = tuple(float(c) for c in self.world)
        if len(world) == 2:
            world = (world[0], world[1], 0.0)
        if len(world) != 3 or world[2] != 0.0:
            raise DataError(f"calibration points must lie on the z=0 plane, got {self.world}")
        object.__setattr__(self, "world", world)
        object.__setattr__(self, "pixel", (float(self.pixel[0]), float(self.pixel[1])))

    def to_dict(self) -> dict:
        """Convert to the correspondence JSON layout."""
        return {"world": list(self.world), "pixel": list(self.pixel)}

    @classmethod
    def from_dict(cls, data: dict) -> "Correspondence":
        """Inverse of :meth:`to_dict`."""
        return cls(world=tuple(data["world"]), pixel=tuple(data["pixel"]))


@dataclass(frozen=True)
class Homography:
    """3x3 plane-to-image homography with unit Frobenius norm."""

    H: np.ndarray

    def __post_init__(self):
        H = np.asarray(self.H, dtype=np.float64).reshape(3, 3)
        norm = np.linalg.norm(H)
        if norm == 0:
            raise DataError("homography cannot be the zero matrix")
        object.__setattr__(self, "H", H / norm)

    def apply(self, xy: np.ndarray) -> np.ndarray:
        """Map plane points (N, 2) to dehomogenized pixels (N, 2)."""
        xy = np.asarray(xy, dtype=np.float64)
        homog = np.hstack([xy, np.ones((xy.shape[0], 1))]) @ self.H.T
        return homog[:, :2] / homog[:, 2:3]


def split_correspondences(pairs: Sequence[Correspondence]) -> tuple[np.ndarray, np.ndarray]:
    """Stack correspondences into (N, 2) plane and (N, 2) pixel arrays."""
    plane = np.array([[p.world[0], p.world[1]] for p in pairs], dtype=np.float64)
    pixels = np.array([p.pixel for p in pairs], dtype=np.float64)
    return plane, pixels


def hartley_normalization(pts: np.ndarray) -> np.ndarray:
    """Similarity T moving the centroid to 0 and the mean distance to sqrt(2).

    Args:
        pts: (N, 2) points.

    Returns:
        np.ndarray: 3x3 transform acting on homogeneous points.
    """
    mean = pts.mean(axis=0)
    mean_dist = np.mean(np.linalg.norm(pts - mean, axis=1))
    s = 1.0 if mean_dist < 1e-12 else np.sqrt(2.0) / mean_dist
    return np.array(
        [[s, 0.0, -s * mean[0]], [0.0, s, -s * mean[1]], [0.0, 0.0, 1.0]], dtype=np.float64
    )


def _apply_h(T: np.ndarray, pts: np.ndarray) -> np.ndarray:
    homog = np.hstack([pts, np.ones((pts.shape[0], 1))]) @ T.T
    return homog[:, :2] / homog[:, 2:3]


def estimate_homography(
    pairs: Sequence[Correspondence],
    max_condition: float = 1e10,
) -> Homography:
    """Estimate H with x_i ~ H (x_i, y_i, 1) by the normalized DLT.

    Both point sets are Hartley-normalized, the 2N x 9 system is solved in
    the least-squares sense by SVD and the result is mapped back. The sign is
    fixed so that H[2, 2] >= 0.

    Args:
        pairs: At least four correspondences, no three world points collinear.
        max_condition: Largest acceptable ratio between the largest and the
            second smallest singular value of the DLT system.

    Returns:
        Homography: Estimated homography with unit Frobenius norm.

    Raises:
        DataError: If fewer than four correspondences are given.
        DegenerateConfigurationError: If the DLT system is rank deficient.
    """
    if len(pairs) < MIN_CORRESPONDENCES:
        raise DataError(
            f"homography estimation needs at least {MIN_CORRESPONDENCES} correspondences, got {len(pairs)}"
        )
    plane, pixels = split_correspondences(pairs)
    T_plane = hartley_normalization(plane)
    T_pix = hartley_normalization(pixels)
    Xn = _apply_h(T_plane, plane)
    xn = _apply_h(T_pix, pixels)

    n = Xn.shape[0]
    A = np.zeros((2 * n, 9), dtype=np.float64)
    X, Y = Xn[:, 0], Xn[:, 1]
    u, v = xn[:, 0], xn[:, 1]
    A[0::2, 0] = -X
    A[0::2, 1] = -Y
    A[0::2, 2] = -1.0
    A[0::2, 6] = u * X
    A[0::2, 7] = u * Y
    A[0::2, 8] = u
    A[1::2, 3] = -X
    A[1::2, 4] = -Y
    A[1::2, 5] = -1.0
    A[1::2, 6] = v * X
    A[1::2, 7] = v * Y
    A[1::2, 8] = v

    _, s, Vt = np.linalg.svd(A)
    # an exactly determined system (4 points) has 8 rows; its 8th singular value is s[7]
    second_smallest = s[7] if s.size >= 8 else 0.0
    condition = np.inf if second_smallest <= 0 else float(s[0] / second_smallest)
    if condition > max_condition:
        raise DegenerateConfigurationError(
            "degenerate correspondence configuration (collinear or repeated points)",
            condition,
        )

    Hn = Vt[-1].reshape(3, 3)
    H = np.linalg.inv(T_pix) @ Hn @ T_plane
    if H[2, 2] < 0:
        H = -H
    logger.debug("homography from %d pairs, DLT condition %.3e", n, condition)
    return Homography(H)
