"""
Ray-traced one-shot catadioptric captures.

The camera looks at the mirror array; every pixel whose ray hits a mirror
dome is reflected (same arithmetic as the ray restoration) and traced into
the analytic scene. The image is rendered with the *true* mirror geometry
while the depth, normal and index maps come from the *ideal* template, which
reproduces the misalignment the warping field has to absorb.
"""

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..calibration import CameraCalibration, Correspondence
from ..errors import GeometryError
from ..geometry import (
    CameraIntrinsics,
    camera_rays,
    intersect_spheres_many,
    look_at,
    pixel_centers,
    project_points,
    restore_reflected_rays,
)
from ..geometry.vectors import apply_matrix
from .mirror_array import MirrorArrayTemplate
from .scene import AnalyticScene

logger = logging.getLogger(__name__)

BOARD_COLOR = (0.92, 0.92, 0.9)
SECONDARY_T_MIN = 1e-6


@dataclass
class GeometryMaps:
    """Per-pixel rendering of the mirror template seen from a camera."""

    depth: np.ndarray
    normals: np.ndarray
    index_map: np.ndarray

    @property
    def mirror_mask(self) -> np.ndarray:
        """Pixels that see a mirror."""
        return self.index_map > 0


@dataclass
class CaptureBundle:
    """Everything one simulated shot produces.

    ``index_map`` stores mirror index + 1 (0 marks pixels without a usable
    mirror ray); ``depth`` is finite exactly on those pixels; ``normals`` are
    unit vectors in the camera frame; ``mask`` flags foreground pixels.
    """

    image: np.ndarray
    depth: np.ndarray
    normals: np.ndarray
    index_map: np.ndarray
    mask: np.ndarray
    calibration: CameraCalibration

    @property
    def valid(self) -> np.ndarray:
        """Pixels that yield a restored ray."""
        return self.index_map > 0

    @property
    def shape(self) -> tuple[int, int]:
        """(height, width)."""
        return self.image.shape[0], self.image.shape[1]

    def summary(self) -> dict:
        """Pixel statistics for logs and CLI output."""
        valid = self.valid
        return {
            "width": int(self.image.shape[1]),
            "height": int(self.image.shape[0]),
            "mirror_pixels": int(valid.sum()),
            "foreground_pixels": int((self.mask & valid).sum()),
            "background_pixels": int((~self.mask & valid).sum()),
            "mirrors_seen": int(np.unique(self.index_map[valid]).size),
        }


def _check_camera_outside(calibration: CameraCalibration, template: MirrorArrayTemplate) -> None:
    center = calibration.center
    dist = np.linalg.norm(template.centers - center, axis=1)
    if np.any(dist <= template.radii):
        raise GeometryError("camera center lies inside a mirror sphere")


def _row_blocks(height: int, threads: int) -> list[tuple[int, int]]:
    n_blocks = max(1, min(height, threads * 4))
    edges = np.linspace(0, height, n_blocks + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def _run_rows(height: int, threads: int, work: Callable[[int, int], None]) -> None:
    blocks = _row_blocks(height, threads)
    if threads <= 1:
        for a, b in blocks:
            work(a, b)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        # each block writes a disjoint slice of the output buffers
        list(pool.map(lambda ab: work(*ab), blocks))


def _mirror_hits(
    calibration: CameraCalibration, template: MirrorArrayTemplate, d_c: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Depth, mirror index (-1 none) and camera-frame normals for camera rays (N, 3)."""
    o_c = calibration.center
    origins = np.broadcast_to(o_c, d_c.shape)
    t, which = intersect_spheres_many(origins, d_c, template.centers, template.radii)
    hit = which >= 0
    points = o_c + t[hit, None] * d_c[hit]
    # the board hides everything below the array plane
    occluded = points[:, 2] < 0.0
    hit_idx = np.flatnonzero(hit)
    which[hit_idx[occluded]] = -1
    t[hit_idx[occluded]] = np.inf
    hit = which >= 0

    normals_c = np.zeros_like(d_c)
    centers = template.centers[which[hit]]
    radii = template.radii[which[hit]]
    n_world = (o_c + t[hit, None] * d_c[hit] - centers) / radii[:, None]
    normals_c[hit] = apply_matrix(calibration.R, n_world)
    return t, which, normals_c


DEFAULT_CAMERA_DISTANCE_MM = 700.0
DEFAULT_CAMERA_FOV_DEG = 26.0


def capture_camera(
    width: int = 480,
    height: int = 420,
    distance_mm: float = DEFAULT_CAMERA_DISTANCE_MM,
    fov_x_deg: float = DEFAULT_CAMERA_FOV_DEG,
    offset_mm=(0.0, 0.0),
) -> CameraCalibration:
    """Ground-truth camera facing the array from the subject side.

    The camera sits at ``(offset_x, offset_y, distance_mm)`` and looks at the
    array center.
    """
    eye = np.array([offset_mm[0], offset_mm[1], distance_mm], dtype=np.float64)
    K = CameraIntrinsics.from_fov(width, height, fov_x_deg)
    return CameraCalibration.from_pose(K, look_at(eye, (0.0, 0.0, 0.0)))


def render_geometry_maps(
    calibration: CameraCalibration, template: MirrorArrayTemplate, threads: int = 1
) -> GeometryMaps:
    """Render the template's depth, camera-frame normal and index maps.

    Args:
        calibration: Camera used to view the array (ground truth or estimated).
        template: Mirror geometry to render.
        threads: Worker threads over image rows.

    Returns:
        GeometryMaps: depth (inf off-mirror), unit normals and index + 1 maps.
    """
    _check_camera_outside(calibration, template)
    K = calibration.K
    H, W = K.height, K.width
    depth = np.full((H, W), np.inf)
    normals = np.zeros((H, W, 3))
    index_map = np.zeros((H, W), dtype=np.int32)
    pixels = pixel_centers(K)
    pose = calibration.pose

    def work(r0: int, r1: int) -> None:
        d_c = camera_rays(K, pose, pixels[r0:r1].reshape(-1, 2))
        t, which, n_c = _mirror_hits(calibration, template, d_c)
        shape = (r1 - r0, W)
        depth[r0:r1] = np.where(which >= 0, t, np.inf).reshape(shape)
        normals[r0:r1] = n_c.reshape(shape + (3,))
        index_map[r0:r1] = (which + 1).reshape(shape)

    _run_rows(H, threads, work)
    return GeometryMaps(depth=depth, normals=normals, index_map=index_map)


def render_capture(
    scene: AnalyticScene,
    camera: CameraCalibration,
    template: MirrorArrayTemplate,
    ideal_template: Optional[MirrorArrayTemplate] = None,
    threads: int = 1,
) -> CaptureBundle:
    """Ray trace the catadioptric image of ``scene``.

    Args:
        scene: Analytic scene in front of the array.
        camera: Ground-truth calibration of the capturing camera.
        template: True mirror geometry used to form the image.
        ideal_template: Geometry used for the emitted maps; defaults to
            ``template`` (no misalignment).
        threads: Worker threads over image rows.

    Returns:
        CaptureBundle: Image, maps, foreground mask and the calibration.

    Raises:
        GeometryError: If the camera sits inside a mirror.
    """
    ideal = template if ideal_template is None else ideal_template
    _check_camera_outside(camera, template)
    _check_camera_outside(camera, ideal)
    if ideal.count != template.count:
        raise GeometryError("true and ideal templates must hold the same mirrors")

    K = camera.K
    H, W = K.height, K.width
    pose = camera.pose
    o_c = camera.center
    pixels = pixel_centers(K)

    image = np.empty((H, W, 3))
    depth = np.full((H, W), np.inf)
    normals = np.zeros((H, W, 3))
    index_map = np.zeros((H, W), dtype=np.int32)
    mask = np.zeros((H, W), dtype=bool)
    counters = {"inter_reflection": 0, "board_reflection": 0, "misaligned": 0}
    counter_lock = threading.Lock()

    def work(r0: int, r1: int) -> None:
        n_pix = (r1 - r0) * W
        block_counts = {"inter_reflection": 0, "board_reflection": 0, "misaligned": 0}
        d_c = camera_rays(K, pose, pixels[r0:r1].reshape(-1, 2))
        t_ideal, which_ideal, n_c_ideal = _mirror_hits(camera, ideal, d_c)
        if ideal is template:
            t_true, which_true, n_c_true = t_ideal, which_ideal, n_c_ideal
        else:
            t_true, which_true, n_c_true = _mirror_hits(camera, template, d_c)

        colors = np.broadcast_to(np.asarray(BOARD_COLOR), (n_pix, 3)).copy()
        fg = np.zeros(n_pix, dtype=bool)
        usable = np.zeros(n_pix, dtype=bool)

        on_mirror = np.flatnonzero(which_true >= 0)
        if on_mirror.size:
            origins, directions, _ = restore_reflected_rays(
                o_c, d_c[on_mirror], t_true[on_mirror], n_c_true[on_mirror], camera.R
            )
            _, other = intersect_spheres_many(
                origins, directions, template.centers, template.radii, t_min=SECONDARY_T_MIN
            )
            hits_mirror = other >= 0
            hits_board = ~hits_mirror & (directions[:, 2] <= 0.0)
            ok = ~hits_mirror & ~hits_board
            scene_colors, scene_hit, _ = scene.trace(origins[ok], directions[ok])
            ray_colors = np.zeros((on_mirror.size, 3))
            ray_colors[ok] = scene_colors
            colors[on_mirror] = ray_colors
            ok_idx = on_mirror[ok]
            fg[ok_idx] = scene_hit
            usable[ok_idx] = True
            block_counts["inter_reflection"] = int(hits_mirror.sum())
            block_counts["board_reflection"] = int(hits_board.sum())

        misaligned = usable & (which_ideal < 0)
        block_counts["misaligned"] = int(misaligned.sum())
        with counter_lock:
            for key, value in block_counts.items():
                counters[key] += value
        valid = usable & (which_ideal >= 0)

        shape = (r1 - r0, W)
        image[r0:r1] = colors.reshape(shape + (3,))
        depth[r0:r1] = np.where(valid, t_ideal, np.inf).reshape(shape)
        normals[r0:r1] = np.where(valid[:, None], n_c_ideal, 0.0).reshape(shape + (3,))
        index_map[r0:r1] = np.where(valid, which_ideal + 1, 0).reshape(shape)
        mask[r0:r1] = (fg & valid).reshape(shape)

    _run_rows(H, threads, work)
    bundle = CaptureBundle(
        image=image, depth=depth, normals=normals, index_map=index_map, mask=mask, calibration=camera
    )
    stats = bundle.summary()
    logger.info(
        "rendered %dx%d capture: %d mirror pixels (%d foreground), %d inter-reflections and "
        "%d board reflections excluded, %d pixels outside the ideal template",
        W,
        H,
        stats["mirror_pixels"],
        stats["foreground_pixels"],
        counters["inter_reflection"],
        counters["board_reflection"],
        counters["misaligned"],
    )
    return bundle


def render_ground_truth_view(
    scene: AnalyticScene, novel_camera: CameraCalibration, threads: int = 1
) -> np.ndarray:
    """Direct (non-catadioptric) pinhole rendering of the scene.

    Args:
        scene: Analytic scene.
        novel_camera: Viewing camera.
        threads: Worker threads over image rows.

    Returns:
        np.ndarray: (H, W, 3) float64 image in [0, 1].
    """
    K = novel_camera.K
    H, W = K.height, K.width
    pose = novel_camera.pose
    o_c = novel_camera.center
    pixels = pixel_centers(K)
    image = np.empty((H, W, 3))

    def work(r0: int, r1: int) -> None:
        d = camera_rays(K, pose, pixels[r0:r1].reshape(-1, 2))
        colors, _, _ = scene.trace(np.broadcast_to(o_c, d.shape).copy(), d)
        image[r0:r1] = colors.reshape(r1 - r0, W, 3)

    _run_rows(H, threads, work)
    return image


def marker_correspondences(
    template: MirrorArrayTemplate,
    camera: CameraCalibration,
    noise_px: float = 0.0,
    seed: Optional[int] = None,
) -> list[Correspondence]:
    """Project the hexagon-corner markers into the capture.

    Markers that fall outside the image are dropped.

    Args:
        template: Array whose printed markers are observed.
        camera: Capturing camera.
        noise_px: Standard deviation of Gaussian pixel noise.
        seed: Noise seed.

    Returns:
        list[Correspondence]: World marker / pixel pairs.
    """
    pixels = project_points(camera.K, camera.pose, template.corners)
    if noise_px > 0:
        rng = np.random.default_rng(seed)
        pixels = pixels + rng.normal(0.0, noise_px, size=pixels.shape)
    inside = (
        (pixels[:, 0] >= 0)
        & (pixels[:, 0] < camera.K.width)
        & (pixels[:, 1] >= 0)
        & (pixels[:, 1] < camera.K.height)
    )
    return [
        Correspondence(world=tuple(X), pixel=tuple(x))
        for X, x, ok in zip(template.corners, pixels, inside)
        if ok
    ]


def with_geometry(
    bundle: CaptureBundle,
    calibration: CameraCalibration,
    template: MirrorArrayTemplate,
    threads: int = 1,
) -> CaptureBundle:
    """Re-render the template maps of a capture for another calibration.

    The image and mask are kept; depth, normals and indices come from
    :func:`render_geometry_maps`. A pixel stays valid only when the capture
    marked it usable and the re-rendered template also covers it.

    Args:
        bundle: Capture (e.g. loaded from disk, where maps are single precision).
        calibration: Calibration to restore with (typically an estimated one).
        template: Ideal template.
        threads: Worker threads over image rows.

    Returns:
        CaptureBundle: Capture whose maps are consistent with ``calibration``.

    Raises:
        GeometryError: If the resolutions differ.
    """
    K = calibration.K
    if bundle.shape != (K.height, K.width):
        raise GeometryError(
            f"capture is {bundle.shape[1]}x{bundle.shape[0]} but the calibration expects {K.width}x{K.height}"
        )
    maps = render_geometry_maps(calibration, template, threads=threads)
    valid = bundle.valid & maps.mirror_mask
    return CaptureBundle(
        image=bundle.image,
        depth=np.where(valid, maps.depth, np.inf),
        normals=np.where(valid[..., None], maps.normals, 0.0),
        index_map=np.where(valid, maps.index_map, 0).astype(np.int32),
        mask=bundle.mask & valid,
        calibration=calibration,
    )
