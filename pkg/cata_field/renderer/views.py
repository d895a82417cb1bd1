"""
Novel-view rendering of a trained field and camera paths.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from scipy.spatial.transform import Rotation
from tqdm import tqdm

from ..calibration import CameraCalibration
from ..errors import ConfigError, DataError
from ..geometry import CameraIntrinsics, Pose, camera_rays, look_at, pixel_centers
from ..neuralfield import FieldParams, SampleBatch, query_field
from .rays import RenderConfig, render_rays
from .volume import estimate_depth

logger = logging.getLogger(__name__)


@dataclass
class RenderedView:
    """Output of :func:`render_view`."""

    rgb: np.ndarray
    opacity: np.ndarray
    depth: Optional[np.ndarray] = None


def render_view(
    params: FieldParams,
    camera: CameraCalibration,
    config: RenderConfig,
    with_depth: bool = False,
    threads: int = 1,
    progress: bool = False,
) -> RenderedView:
    """Render the field from a pinhole camera in the reference space.

    Warping is bypassed. Sampling is deterministic (stratum midpoints and
    fixed quantiles), so rendering the same view twice is bit-identical.

    Args:
        params: Field parameters.
        camera: Viewing camera; its intrinsics set the resolution.
        config: Sample counts, background and chunk size.
        with_depth: Also return the thresholded depth of the coarse pass
            (0 where the ray misses the box).
        threads: Worker threads over ray chunks.
        progress: Show a progress bar.

    Returns:
        RenderedView: (H, W, 3) colors, (H, W) opacity and optional depth.
    """
    K = camera.K
    H, W = K.height, K.width
    directions = camera_rays(K, camera.pose, pixel_centers(K)).reshape(-1, 3)
    origins = np.broadcast_to(camera.center, directions.shape)
    n = directions.shape[0]
    rgb = np.empty((n, 3))
    opacity = np.zeros(n)
    depth = np.zeros(n) if with_depth else None
    anchor = np.full(config.chunk, params.anchor_index)

    def query(batch: SampleBatch):
        rgb_pts, sigma, _ = query_field(params, batch)
        return rgb_pts, sigma

    def work(start: int) -> None:
        stop = min(start + config.chunk, n)
        result = render_rays(
            query, origins[start:stop], directions[start:stop], anchor[: stop - start], params.bbox, config
        )
        rgb[start:stop] = result.rgb_fine
        final = result.fine if result.fine is not None else result.coarse
        if final is not None:
            opacity[start + result.rows] = final.opacity
            if depth is not None:
                depth[start + result.rows] = estimate_depth(result.coarse.samples, config.depth_tau)

    starts = range(0, n, config.chunk)
    bar = tqdm(total=len(starts), desc="render", unit="chunk", disable=not progress, leave=False)
    if threads <= 1:
        for start in starts:
            work(start)
            bar.update()
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for _ in pool.map(work, starts):
                bar.update()
    bar.close()

    return RenderedView(
        rgb=rgb.reshape(H, W, 3),
        opacity=opacity.reshape(H, W),
        depth=None if depth is None else depth.reshape(H, W),
    )


def frontal_arc(
    target,
    distance: float,
    n_views: int,
    intrinsics: CameraIntrinsics,
    azimuth_deg: float = 30.0,
    elevation_deg: float = 15.0,
) -> list[CameraCalibration]:
    """Deterministic arc of cameras facing the subject from the array side.

    View k of n sweeps azimuth linearly over [-azimuth, +azimuth] while the
    elevation follows elevation * sin(2 pi k / (n - 1)); every camera looks
    at ``target`` from ``distance`` along -z rotated by (azimuth, elevation).

    Args:
        target: Point the cameras look at (mm).
        distance: Eye-to-target distance (mm).
        n_views: Number of cameras (>= 1).
        intrinsics: Shared intrinsics.
        azimuth_deg: Half range of the azimuth sweep.
        elevation_deg: Amplitude of the elevation sweep.

    Returns:
        list[CameraCalibration]: One calibration per view.
    """
    if n_views < 1:
        raise ConfigError(f"n_views must be >= 1, got {n_views}")
    if distance <= 0:
        raise ConfigError(f"distance must be positive, got {distance}")
    target = np.asarray(target, dtype=np.float64)
    s = np.linspace(0.0, 1.0, n_views) if n_views > 1 else np.array([0.5])
    azimuth = -azimuth_deg + 2.0 * azimuth_deg * s
    elevation = elevation_deg * np.sin(2.0 * np.pi * s)
    cameras = []
    for az, el in zip(azimuth, elevation):
        offset = Rotation.from_euler("yx", [az, el], degrees=True).apply([0.0, 0.0, -distance])
        pose = look_at(target + offset, target)
        cameras.append(CameraCalibration.from_pose(intrinsics, pose))
    return cameras


def save_camera_path(cameras: Sequence[CameraCalibration], path: Union[str, Path]) -> None:
    """Write ``{"poses": [{"K": ..., "R": [...], "t": [...]}, ...]}``."""
    data = {"poses": [{"K": c.K.to_dict(), "R": c.R.reshape(-1).tolist(), "t": c.t.tolist()} for c in cameras]}
    Path(path).write_text(json.dumps(data, indent=2), encoding="utf-8")


def load_camera_path(path: Union[str, Path], intrinsics: Optional[CameraIntrinsics] = None) -> list[CameraCalibration]:
    """Read a camera path; ``intrinsics`` fills poses that omit ``K``.

    Raises:
        FileNotFoundError: If the file does not exist.
        DataError: On malformed entries.
    """
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"Camera path not found: {path}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
        cameras = []
        for item in data["poses"]:
            if "K" in item:
                K = CameraIntrinsics.from_dict(item["K"])
            elif intrinsics is not None:
                K = intrinsics
            else:
                raise DataError("camera path entry without intrinsics")
            pose = Pose(np.array(item["R"], dtype=np.float64).reshape(3, 3), np.array(item["t"], dtype=np.float64))
            cameras.append(CameraCalibration.from_pose(K, pose))
        return cameras
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, DataError):
            raise
        raise DataError(f"malformed camera path {path}: {e}") from e
