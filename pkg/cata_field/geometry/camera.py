"""
Pinhole camera model.

Conventions: world-to-camera pose X_c = R X + t, camera axes x right,
y down, z forward, pixel (u, v) addresses column u and row v with pixel
centers at half-integer coordinates.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import GeometryError
from .primitives import reflect_many
from .vectors import apply_matrix, as_vec3, cross3, is_rotation, normalize


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics with zero skew."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise GeometryError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if self.width <= 0 or self.height <= 0:
            raise GeometryError(f"image size must be positive, got {self.width}x{self.height}")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise GeometryError(
                f"principal point ({self.cx}, {self.cy}) outside image {self.width}x{self.height}"
            )

    @classmethod
    def from_fov(cls, width: int, height: int, fov_x_deg: float) -> "CameraIntrinsics":
        """Square-pixel intrinsics with the principal point at the image center."""
        f = 0.5 * width / np.tan(np.radians(fov_x_deg) / 2.0)
        return cls(fx=float(f), fy=float(f), cx=width / 2.0, cy=height / 2.0, width=width, height=height)

    @property
    def K(self) -> np.ndarray:
        """3x3 intrinsic matrix."""
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]], dtype=np.float64
        )

    @property
    def K_inv(self) -> np.ndarray:
        """Closed-form inverse of K."""
        return np.array(
            [
                [1.0 / self.fx, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, -self.cy / self.fy],
                [0.0, 0.0, 1.0],
            ],
            dtype=np.float64,
        )

    def scaled(self, factor: float) -> "CameraIntrinsics":
        """Intrinsics for an image resized by ``factor``."""
        return CameraIntrinsics(
            fx=self.fx * factor,
            fy=self.fy * factor,
            cx=self.cx * factor,
            cy=self.cy * factor,
            width=max(1, int(round(self.width * factor))),
            height=max(1, int(round(self.height * factor))),
        )

    def to_dict(self) -> dict:
        """Convert to the calibration JSON layout."""
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CameraIntrinsics":
        """Inverse of :meth:`to_dict`."""
        return cls(
            fx=float(data["fx"]),
            fy=float(data["fy"]),
            cx=float(data["cx"]),
            cy=float(data["cy"]),
            width=int(data["width"]),
            height=int(data["height"]),
        )


@dataclass(frozen=True)
class Pose:
    """World-to-camera rigid transform [R | t]."""

    R: np.ndarray
    t: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.asarray(self.R, dtype=np.float64).reshape(3, 3).copy()
        if not is_rotation(R):
            raise GeometryError("pose rotation must be orthonormal with det +1")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", as_vec3(self.t).reshape(3).copy())

    @classmethod
    def identity(cls) -> "Pose":
        """Camera at the world origin looking along +z."""
        return cls(np.eye(3), np.zeros(3))

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates, -Rᵀ t."""
        return -self.R.T @ self.t

    @property
    def matrix(self) -> np.ndarray:
        """3x4 [R | t]."""
        return np.hstack([self.R, self.t[:, None]])

    def to_camera(self, X: np.ndarray) -> np.ndarray:
        """Transform world points (..., 3) into the camera frame."""
        return apply_matrix(self.R, as_vec3(X)) + self.t


def look_at(eye, target, up=(0.0, 1.0, 0.0)) -> Pose:
    """Pose of a camera at ``eye`` looking at ``target``.

    Image rows run against ``up`` (camera y points down).

    Args:
        eye: Camera center (mm).
        target: Point the optical axis passes through (mm).
        up: Approximate world up direction.

    Returns:
        Pose: World-to-camera transform.

    Raises:
        GeometryError: If the viewing direction is parallel to ``up``.
    """
    eye = as_vec3(eye).reshape(3)
    z = as_vec3(target).reshape(3) - eye
    z = z / np.linalg.norm(z)
    x = cross3(z, as_vec3(up).reshape(3))
    if np.linalg.norm(x) < 1e-9:
        raise GeometryError("look_at: viewing direction is parallel to the up vector")
    x = x / np.linalg.norm(x)
    y = cross3(z, x)
    R = np.stack([x, y, z])
    return Pose(R, -R @ eye)


def project_points(K: CameraIntrinsics, pose: Pose, X) -> np.ndarray:
    """Project world points into pixel coordinates.

    Args:
        K: Camera intrinsics.
        pose: World-to-camera pose.
        X: (..., 3) world points in mm.

    Returns:
        np.ndarray: (..., 2) pixel coordinates (u, v).

    Raises:
        GeometryError: If any point is at or behind the camera plane.
    """
    Xc = pose.to_camera(X)
    z = Xc[..., 2]
    if np.any(z <= 0):
        raise GeometryError("cannot project points at or behind the camera plane")
    u = K.fx * Xc[..., 0] / z + K.cx
    v = K.fy * Xc[..., 1] / z + K.cy
    return np.stack([u, v], axis=-1)


def project(K: CameraIntrinsics, pose: Pose, X) -> tuple[float, float]:
    """Project a single world point; see :func:`project_points`."""
    uv = project_points(K, pose, as_vec3(X).reshape(3))
    return float(uv[0]), float(uv[1])


def pixel_centers(K: CameraIntrinsics) -> np.ndarray:
    """(H, W, 2) array of pixel-center coordinates (u, v)."""
    u = np.arange(K.width, dtype=np.float64) + 0.5
    v = np.arange(K.height, dtype=np.float64) + 0.5
    uu, vv = np.meshgrid(u, v)
    return np.stack([uu, vv], axis=-1)


def camera_rays(K: CameraIntrinsics, pose: Pose, pixels: np.ndarray) -> np.ndarray:
    """World-space unit directions normalize(Rᵀ K⁻¹ [u v 1]ᵀ) for pixels (..., 2)."""
    pixels = np.asarray(pixels, dtype=np.float64)
    ones = np.ones(pixels.shape[:-1])
    homog = np.stack([pixels[..., 0], pixels[..., 1], ones], axis=-1)
    local = apply_matrix(K.K_inv, homog)
    return normalize(apply_matrix(pose.R.T, local))


def restore_reflected_rays(
    camera_center: np.ndarray,
    d_c: np.ndarray,
    t_d: np.ndarray,
    n_c: np.ndarray,
    R: np.ndarray,
    normals_world: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Reflected world rays from per-pixel depth and camera-frame normals.

    o = o_c + t_d d_c, n = Rᵀ n_c, d = d_c - 2 (nᵀ d_c) n.

    Args:
        camera_center: Camera center o_c (3,).
        d_c: (N, 3) unit camera-ray directions.
        t_d: (N,) depths along d_c.
        n_c: (N, 3) unit normals in the camera frame.
        R: World-to-camera rotation.
        normals_world: Optional precomputed world normals.

    Returns:
        tuple: origins (N, 3), reflected unit directions (N, 3), world normals (N, 3).
    """
    origins = camera_center + t_d[..., None] * d_c
    n = apply_matrix(np.asarray(R).T, n_c) if normals_world is None else normals_world
    return origins, reflect_many(d_c, n), n
