"""
Coarse-to-fine rendering of ray batches through a field query.

The same pipeline serves inference (plain :func:`query_field`) and training
(a :class:`FieldTape` that records each query for the reverse pass).
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ..errors import ConfigError
from ..neuralfield import SampleBatch
from ..raybank import BBox, clip_to_bbox_many
from .sampling import sample_coarse, sample_fine
from .volume import RaySampleSet, composite, integrate

BACKGROUNDS = {
    "green": (0.0, 0.8, 0.0),
    "white": (1.0, 1.0, 1.0),
    "black": (0.0, 0.0, 0.0),
}

Query = Callable[[SampleBatch], tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class RenderConfig:
    """Sampling and output settings.

    Attributes:
        n_coarse: Stratified samples per ray (>= 2).
        n_fine: Importance samples per ray (0 disables the fine pass).
        width: Output width in pixels.
        height: Output height in pixels.
        background: Background name (green, white, black) or RGB triple.
        chunk: Rays per field query during view rendering.
        length_unit_mm: Millimeters per density length unit; None uses the
            largest half extent of the bounding box.
        depth_tau: Density threshold of rendered depth maps.
    """

    n_coarse: int = 64
    n_fine: int = 32
    width: int = 160
    height: int = 120
    background: object = "green"
    chunk: int = 2048
    length_unit_mm: Optional[float] = None
    depth_tau: float = 0.0

    def __post_init__(self):
        if self.n_coarse < 2:
            raise ConfigError(f"n_coarse must be >= 2, got {self.n_coarse}")
        if self.n_fine < 0:
            raise ConfigError(f"n_fine must be >= 0, got {self.n_fine}")
        if self.width < 1 or self.height < 1 or self.chunk < 1:
            raise ConfigError("width, height and chunk must be positive")
        if self.length_unit_mm is not None and self.length_unit_mm <= 0:
            raise ConfigError("length_unit_mm must be positive")
        self.background_rgb()

    def background_rgb(self) -> np.ndarray:
        """Background as an RGB array."""
        if isinstance(self.background, str):
            if self.background not in BACKGROUNDS:
                raise ConfigError(f"unknown background {self.background!r}; choose one of {sorted(BACKGROUNDS)}")
            return np.array(BACKGROUNDS[self.background])
        rgb = np.asarray(self.background, dtype=np.float64)
        if rgb.shape != (3,):
            raise ConfigError(f"background must be a name or an RGB triple, got {self.background!r}")
        return rgb

    def length_unit(self, bbox: BBox) -> float:
        """Length unit for a bounding box."""
        return self.length_unit_mm if self.length_unit_mm is not None else float(np.max(bbox.half_extent))

    @classmethod
    def large(cls) -> "RenderConfig":
        """96 coarse + 32 fine samples, 1200x900 output."""
        return cls(n_coarse=96, n_fine=32, width=1200, height=900)

    @classmethod
    def desk(cls) -> "RenderConfig":
        """CPU-sized default, 160x120 output."""
        return cls()

    @classmethod
    def toy(cls) -> "RenderConfig":
        """Tiny setting for tests."""
        return cls(n_coarse=16, n_fine=8, width=32, height=24, chunk=512)

    def to_dict(self) -> dict:
        """Convert to a JSON-friendly dictionary."""
        background = self.background if isinstance(self.background, str) else list(self.background)
        return {
            "n_coarse": self.n_coarse,
            "n_fine": self.n_fine,
            "width": self.width,
            "height": self.height,
            "background": background,
            "chunk": self.chunk,
            "length_unit_mm": self.length_unit_mm,
            "depth_tau": self.depth_tau,
        }


@dataclass
class PassResult:
    """One integration pass over the rays that hit the box."""

    samples: RaySampleSet
    rgb: np.ndarray
    opacity: np.ndarray
    weights: np.ndarray
    query_index: int


@dataclass
class RayRenderResult:
    """Rendering of a ray batch.

    ``rgb_coarse``/``rgb_fine`` cover every ray (background composite
    included); ``coarse``/``fine`` only the rays listed in ``rows``.
    """

    rows: np.ndarray
    t_near: np.ndarray
    t_far: np.ndarray
    rgb_coarse: np.ndarray
    rgb_fine: np.ndarray
    coarse: Optional[PassResult] = None
    fine: Optional[PassResult] = None
    n_queries: int = 0


def _points_batch(
    origins: np.ndarray,
    directions: np.ndarray,
    mirrors: np.ndarray,
    t: np.ndarray,
    warp: bool,
    network: str,
) -> SampleBatch:
    S = t.shape[1]
    points = origins[:, None, :] + t[..., None] * directions[:, None, :]
    return SampleBatch(
        points=points.reshape(-1, 3),
        directions=np.repeat(directions, S, axis=0),
        mirror_index=np.repeat(mirrors, S),
        warp=warp,
        network=network,
    )


def render_rays(
    query: Query,
    origins: np.ndarray,
    directions: np.ndarray,
    mirror_index: np.ndarray,
    bbox: BBox,
    config: RenderConfig,
    rng: Optional[np.random.Generator] = None,
    warp: bool = False,
) -> RayRenderResult:
    """Clip, sample, query and integrate a batch of rays.

    Args:
        query: Field evaluation ``SampleBatch -> (rgb, sigma)``.
        origins: (R, 3) ray origins.
        directions: (R, 3) unit directions.
        mirror_index: (R,) mirror of each ray (ignored when ``warp`` is off).
        bbox: Sampling box.
        config: Sample counts and background.
        rng: Jitter generator; None renders deterministically.
        warp: Apply the warping field.

    Returns:
        RayRenderResult: Colors of both passes and the per-pass state needed
            for the reverse pass. Rays missing the box render as background.
    """
    origins = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
    directions = np.asarray(directions, dtype=np.float64).reshape(-1, 3)
    mirror_index = np.asarray(mirror_index, dtype=np.int64).reshape(-1)
    n_rays = origins.shape[0]
    bg = config.background_rgb()
    unit = config.length_unit(bbox)

    t_near, t_far, hit = clip_to_bbox_many(origins, directions, bbox)
    rows = np.flatnonzero(hit)
    rgb_coarse = np.broadcast_to(bg, (n_rays, 3)).copy()
    rgb_fine = rgb_coarse.copy()
    result = RayRenderResult(rows=rows, t_near=t_near, t_far=t_far, rgb_coarse=rgb_coarse, rgb_fine=rgb_fine)
    if rows.size == 0:
        return result

    o, d, m = origins[rows], directions[rows], mirror_index[rows]
    near, far = t_near[rows], t_far[rows]

    t_c = sample_coarse((near, far), config.n_coarse, rng)
    colors, sigma = query(_points_batch(o, d, m, t_c, warp, "coarse"))
    samples = RaySampleSet.build(t_c, far, sigma, colors, length_unit=unit)
    rgb, opacity, weights = integrate(samples)
    result.coarse = PassResult(samples, rgb, opacity, weights, query_index=result.n_queries)
    result.n_queries += 1
    rgb_coarse[rows] = composite(rgb, opacity, bg)

    if config.n_fine > 0:
        t_f = sample_fine(t_c, weights, config.n_fine, far, rng)
        colors, sigma = query(_points_batch(o, d, m, t_f, warp, "fine"))
        samples_f = RaySampleSet.build(t_f, far, sigma, colors, length_unit=unit)
        rgb_f, opacity_f, weights_f = integrate(samples_f)
        result.fine = PassResult(samples_f, rgb_f, opacity_f, weights_f, query_index=result.n_queries)
        result.n_queries += 1
        rgb_fine[rows] = composite(rgb_f, opacity_f, bg)
    else:
        rgb_fine[rows] = rgb_coarse[rows]
    return result
