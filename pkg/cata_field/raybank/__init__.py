"""Ray bank module: restored training rays and bounding-box clipping."""

from .bank import BBox, RayBank, RestoredRay
from .restore import camera_ray_direction, clip_to_bbox, clip_to_bbox_many, restore_rays

__all__ = [
    "BBox",
    "RayBank",
    "RestoredRay",
    "camera_ray_direction",
    "clip_to_bbox",
    "clip_to_bbox_many",
    "restore_rays",
]
