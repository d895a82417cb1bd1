"""
Ray restoration: pixels of a catadioptric capture to world-space rays.

For a valid mirror pixel with camera ray d_c, template depth t_d and
camera-frame normal n_c:

    o = o_c + t_d d_c,    n = Rᵀ n_c,    d = d_c - 2 (nᵀ d_c) n
"""

import logging
from typing import Optional

import numpy as np

from ..calibration import CameraCalibration
from ..errors import DataError
from ..geometry import camera_rays, pixel_centers, restore_reflected_rays
from ..geometry.vectors import norm3
from ..simulator import CaptureBundle, MirrorArrayTemplate
from ..simulator.scene import slab_intervals
from .bank import BBox, RayBank

logger = logging.getLogger(__name__)

SURFACE_TOLERANCE_MM = 1e-6


def camera_ray_direction(calibration: CameraCalibration, pixel) -> np.ndarray:
    """Unit world direction of the camera ray through a pixel position.

    Args:
        calibration: Camera calibration.
        pixel: Continuous (u, v) position; pixel (i, j) has its center at
            (i + 0.5, j + 0.5).

    Returns:
        np.ndarray: normalize(Rᵀ K⁻¹ [u v 1]ᵀ).
    """
    return camera_rays(calibration.K, calibration.pose, np.asarray(pixel, dtype=np.float64))


def clip_to_bbox_many(
    origins: np.ndarray, directions: np.ndarray, bbox: BBox
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized :func:`clip_to_bbox`.

    Returns:
        tuple: ``(t_near, t_far, hit)``; ``t_near`` is clamped to 0 and the
            interval is only meaningful where ``hit`` is set.
    """
    t_near, t_far = slab_intervals(np.atleast_2d(origins), np.atleast_2d(directions), bbox.min, bbox.max)
    t_near = np.maximum(t_near, 0.0)
    return t_near, t_far, t_far > t_near


def clip_to_bbox(ray, bbox: BBox) -> Optional[tuple[float, float]]:
    """Parametric interval of a ray inside the box, restricted to t >= 0.

    Args:
        ray: Anything with ``origin`` and unit ``direction`` attributes.
        bbox: Sampling box.

    Returns:
        Optional[tuple[float, float]]: ``(t_near, t_far)``, or None when the
            ray misses the box or the box lies behind the origin.
    """
    t_near, t_far, hit = clip_to_bbox_many(ray.origin[None, :], ray.direction[None, :], bbox)
    if not hit[0]:
        return None
    return float(t_near[0]), float(t_far[0])


def restore_rays(
    bundle: CaptureBundle,
    calibration: CameraCalibration,
    template: MirrorArrayTemplate,
    bbox: BBox,
) -> RayBank:
    """Build the training ray bank from a capture.

    Args:
        bundle: Capture with depth, normal, index and mask maps; the maps
            must have been rendered for ``calibration`` and ``template``.
        calibration: Calibration used for restoration (ground truth or
            estimated).
        template: Ideal mirror template the maps were rendered from.
        bbox: Sampling box; foreground rays that miss it are dropped.

    Returns:
        RayBank: One ray per valid mirror pixel (minus dropped rays).

    Raises:
        DataError: If the maps do not match the calibration resolution or
            the template.
    """
    K = calibration.K
    H, W = bundle.shape
    if (W, H) != (K.width, K.height):
        raise DataError(f"capture is {W}x{H} but the calibration expects {K.width}x{K.height}")

    index_map = bundle.index_map
    finite = np.isfinite(bundle.depth)
    valid = (index_map > 0) & finite
    skipped = {
        "no_mirror": int(np.count_nonzero((index_map == 0) & ~finite)),
        "invalid_depth": int(np.count_nonzero(index_map > 0) - np.count_nonzero(valid)),
        "orphan_depth": int(np.count_nonzero((index_map == 0) & finite)),
    }
    if skipped["invalid_depth"] or skipped["orphan_depth"]:
        logger.warning(
            "skipping %d mirror pixels without depth and %d depth pixels without a mirror index",
            skipped["invalid_depth"],
            skipped["orphan_depth"],
        )
    if np.any(index_map[valid] > template.count):
        raise DataError(f"index map references mirrors beyond the {template.count}-mirror template")

    rows, cols = np.nonzero(valid)
    pixels = pixel_centers(K)[rows, cols]
    d_c = camera_rays(K, calibration.pose, pixels)
    origins, directions, _ = restore_reflected_rays(
        calibration.center, d_c, bundle.depth[rows, cols], bundle.normals[rows, cols], calibration.R
    )
    mirror_index = index_map[rows, cols].astype(np.int64) - 1
    foreground = bundle.mask[rows, cols]

    off_surface = np.abs(norm3(origins - template.centers[mirror_index]) - template.radii[mirror_index])
    if off_surface.size and float(off_surface.max()) > SURFACE_TOLERANCE_MM:
        raise DataError(
            f"restored origins leave the template spheres by up to {off_surface.max():.3e} mm; "
            "maps and template disagree"
        )

    _, _, inside = clip_to_bbox_many(origins, directions, bbox)
    dropped = foreground & ~inside
    skipped["foreground_outside_bbox"] = int(dropped.sum())
    if skipped["foreground_outside_bbox"]:
        logger.warning(
            "dropping %d foreground rays that miss the bounding box", skipped["foreground_outside_bbox"]
        )
    keep = ~dropped

    bank = RayBank(
        origins=origins[keep],
        directions=directions[keep],
        colors=bundle.image[rows[keep], cols[keep]],
        mirror_index=mirror_index[keep],
        foreground=foreground[keep],
        pixels=np.stack([cols[keep], rows[keep]], axis=1),
        bbox=bbox,
        n_mirrors=template.count,
        skipped=skipped,
    )
    logger.info(
        "restored %d rays (%d foreground, %d background) from %d mirrors",
        len(bank),
        bank.foreground_count,
        bank.background_count,
        int(np.count_nonzero(bank.per_mirror_counts)),
    )
    return bank
