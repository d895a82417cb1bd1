"""Geometry module: vectors, rays, sphere mirrors and the pinhole camera."""

from .camera import (
    CameraIntrinsics,
    Pose,
    camera_rays,
    look_at,
    pixel_centers,
    project,
    project_points,
    restore_reflected_rays,
)
from .primitives import (
    Hit,
    Ray,
    SphereMirror,
    intersect_ray_sphere,
    intersect_spheres_many,
    reflect,
    reflect_many,
)
from .vectors import is_rotation, normalize, rotation_geodesic

__all__ = [
    "CameraIntrinsics",
    "Pose",
    "camera_rays",
    "look_at",
    "pixel_centers",
    "project",
    "project_points",
    "restore_reflected_rays",
    "Hit",
    "Ray",
    "SphereMirror",
    "intersect_ray_sphere",
    "intersect_spheres_many",
    "reflect",
    "reflect_many",
    "is_rotation",
    "normalize",
    "rotation_geodesic",
]
