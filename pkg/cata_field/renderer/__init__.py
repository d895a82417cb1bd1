"""Renderer module: ray sampling, volume integration, depth and novel views."""

from .rays import BACKGROUNDS, PassResult, RayRenderResult, RenderConfig, render_rays
from .sampling import bin_edges, inverse_cdf, sample_coarse, sample_fine
from .views import RenderedView, frontal_arc, load_camera_path, render_view, save_camera_path
from .volume import (
    RaySampleSet,
    composite,
    composite_backward,
    estimate_depth,
    h_filter,
    integrate,
    integrate_backward,
)

__all__ = [
    "BACKGROUNDS",
    "PassResult",
    "RayRenderResult",
    "RenderConfig",
    "render_rays",
    "bin_edges",
    "inverse_cdf",
    "sample_coarse",
    "sample_fine",
    "RenderedView",
    "frontal_arc",
    "load_camera_path",
    "render_view",
    "save_camera_path",
    "RaySampleSet",
    "composite",
    "composite_backward",
    "estimate_depth",
    "h_filter",
    "integrate",
    "integrate_backward",
]
