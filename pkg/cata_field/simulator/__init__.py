"""Simulator module: mirror array, analytic scenes and ray-traced captures."""

from .capture import (
    DEFAULT_CAMERA_DISTANCE_MM,
    DEFAULT_CAMERA_FOV_DEG,
    CaptureBundle,
    GeometryMaps,
    capture_camera,
    marker_correspondences,
    render_capture,
    render_geometry_maps,
    render_ground_truth_view,
    with_geometry,
)
from .mirror_array import (
    DEFAULT_DIAMETER_MM,
    DEFAULT_LAYOUT,
    DEFAULT_PITCH_MM,
    STANDARD_LAYOUTS,
    MirrorArrayTemplate,
    build_array_template,
    layout_for_count,
    perturb_template,
)
from .scene import (
    AnalyticScene,
    BoxPrimitive,
    PlanePrimitive,
    SpherePrimitive,
    Texture,
    default_scene,
    slab_intervals,
    uniform_scene,
)

__all__ = [
    "DEFAULT_CAMERA_DISTANCE_MM",
    "DEFAULT_CAMERA_FOV_DEG",
    "CaptureBundle",
    "GeometryMaps",
    "capture_camera",
    "marker_correspondences",
    "render_capture",
    "render_geometry_maps",
    "render_ground_truth_view",
    "with_geometry",
    "DEFAULT_DIAMETER_MM",
    "DEFAULT_LAYOUT",
    "DEFAULT_PITCH_MM",
    "STANDARD_LAYOUTS",
    "MirrorArrayTemplate",
    "build_array_template",
    "layout_for_count",
    "perturb_template",
    "AnalyticScene",
    "BoxPrimitive",
    "PlanePrimitive",
    "SpherePrimitive",
    "Texture",
    "default_scene",
    "slab_intervals",
    "uniform_scene",
]
