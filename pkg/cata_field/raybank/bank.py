"""
Restored training rays and the ray bank container.
"""

from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from ..errors import ConfigError, DataError, GeometryError
from ..geometry.vectors import UNIT_TOLERANCE, as_vec3, norm3


@dataclass(frozen=True)
class BBox:
    """Axis-aligned sampling box (mm)."""

    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        lo = as_vec3(self.min)
        hi = as_vec3(self.max)
        if not np.all(lo < hi):
            raise ConfigError(f"bounding box min {lo.tolist()} must be < max {hi.tolist()} componentwise")
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)

    @property
    def center(self) -> np.ndarray:
        """Box center."""
        return 0.5 * (self.min + self.max)

    @property
    def half_extent(self) -> np.ndarray:
        """Half side lengths."""
        return 0.5 * (self.max - self.min)

    def contains(self, points: np.ndarray, margin: float = 0.0) -> np.ndarray:
        """Boolean mask of points (..., 3) inside the box grown by ``margin``."""
        points = np.asarray(points, dtype=np.float64)
        return np.all((points >= self.min - margin) & (points <= self.max + margin), axis=-1)

    def to_unit(self, points: np.ndarray) -> np.ndarray:
        """Map box coordinates affinely onto [-1, 1]³."""
        return (np.asarray(points, dtype=np.float64) - self.center) / self.half_extent

    def inflated(self, factor: float) -> "BBox":
        """Box scaled about its center."""
        return BBox(self.center - factor * self.half_extent, self.center + factor * self.half_extent)

    def to_dict(self) -> dict:
        """Convert to ``{"min": [...], "max": [...]}``."""
        return {"min": self.min.tolist(), "max": self.max.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "BBox":
        """Inverse of :meth:`to_dict`."""
        try:
            return cls(min=np.asarray(data["min"], dtype=np.float64), max=np.asarray(data["max"], dtype=np.float64))
        except (KeyError, TypeError) as e:
            raise DataError(f"malformed bounding box: {e}") from e


@dataclass(frozen=True)
class RestoredRay:
    """One training sample: a reflected world ray and the color it carries."""

    origin: np.ndarray
    direction: np.ndarray
    color: np.ndarray
    mirror_index: int
    is_foreground: bool
    pixel: tuple[int, int]

    def __post_init__(self):
        d = as_vec3(self.direction)
        if abs(float(norm3(d)) - 1.0) > UNIT_TOLERANCE:
            raise GeometryError(f"restored ray direction is not unit length: {d.tolist()}")
        object.__setattr__(self, "origin", as_vec3(self.origin))
        object.__setattr__(self, "direction", d)
        object.__setattr__(self, "color", as_vec3(self.color))

    def to_dict(self) -> dict:
        """Convert to a JSON-friendly dictionary."""
        return {
            "origin": self.origin.tolist(),
            "direction": self.direction.tolist(),
            "color": self.color.tolist(),
            "mirror_index": self.mirror_index,
            "is_foreground": self.is_foreground,
            "pixel": list(self.pixel),
        }


class RayBank:
    """Immutable structure-of-arrays collection of restored rays.

    Attributes:
        origins: (N, 3) ray origins on the mirror surfaces.
        directions: (N, 3) unit reflected directions.
        colors: (N, 3) RGB in [0, 1].
        mirror_index: (N,) mirror index of each ray.
        foreground: (N,) foreground flags.
        pixels: (N, 2) source pixel (u, v) as integer column/row.
        bbox: Sampling box.
        n_mirrors: Number of mirrors in the template the rays came from.
        skipped: Counters of pixels that produced no ray, by reason.
    """

    def __init__(
        self,
        origins: np.ndarray,
        directions: np.ndarray,
        colors: np.ndarray,
        mirror_index: np.ndarray,
        foreground: np.ndarray,
        pixels: np.ndarray,
        bbox: BBox,
        n_mirrors: Optional[int] = None,
        skipped: Optional[dict[str, int]] = None,
    ):
        n = int(np.asarray(origins).shape[0])
        self.origins = self._frozen(origins, np.float64, (n, 3))
        self.directions = self._frozen(directions, np.float64, (n, 3))
        self.colors = self._frozen(colors, np.float64, (n, 3))
        self.mirror_index = self._frozen(mirror_index, np.int64, (n,))
        self.foreground = self._frozen(foreground, bool, (n,))
        self.pixels = self._frozen(pixels, np.int64, (n, 2))
        self.bbox = bbox
        if n_mirrors is None:
            n_mirrors = int(self.mirror_index.max()) + 1 if n else 0
        if n and (self.mirror_index.min() < 0 or self.mirror_index.max() >= n_mirrors):
            raise DataError(f"mirror indices outside [0, {n_mirrors})")
        self.n_mirrors = int(n_mirrors)
        self.skipped = dict(skipped or {})

    @staticmethod
    def _frozen(values, dtype, shape) -> np.ndarray:
        arr = np.array(values, dtype=dtype).reshape(shape)
        arr.setflags(write=False)
        return arr

    def __len__(self) -> int:
        return int(self.origins.shape[0])

    def __getitem__(self, i: int) -> RestoredRay:
        return RestoredRay(
            origin=self.origins[i],
            direction=self.directions[i],
            color=self.colors[i],
            mirror_index=int(self.mirror_index[i]),
            is_foreground=bool(self.foreground[i]),
            pixel=(int(self.pixels[i, 0]), int(self.pixels[i, 1])),
        )

    def __iter__(self) -> Iterator[RestoredRay]:
        for i in range(len(self)):
            yield self[i]

    @property
    def per_mirror_counts(self) -> np.ndarray:
        """(n_mirrors,) number of rays per mirror."""
        return np.bincount(self.mirror_index, minlength=self.n_mirrors)

    @property
    def foreground_count(self) -> int:
        """Number of foreground rays."""
        return int(self.foreground.sum())

    @property
    def background_count(self) -> int:
        """Number of background rays."""
        return len(self) - self.foreground_count

    def subset(self, selector) -> "RayBank":
        """Bank restricted to a boolean mask or index array."""
        return RayBank(
            self.origins[selector],
            self.directions[selector],
            self.colors[selector],
            self.mirror_index[selector],
            self.foreground[selector],
            self.pixels[selector],
            bbox=self.bbox,
            n_mirrors=self.n_mirrors,
        )

    def summary(self) -> dict:
        """Ray statistics for logs, the JSON sidecar and CLI output."""
        return {
            "rays": len(self),
            "foreground": self.foreground_count,
            "background": self.background_count,
            "n_mirrors": self.n_mirrors,
            "per_mirror": self.per_mirror_counts.tolist(),
            "skipped": dict(self.skipped),
        }

    def __repr__(self) -> str:
        return (
            f"RayBank(rays={len(self)}, foreground={self.foreground_count}, "
            f"mirrors={self.n_mirrors})"
        )
