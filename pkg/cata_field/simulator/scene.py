"""
Analytic test scenes: textured spheres, bounded planes and boxes.

Scenes are described in JSON::

    {
      "background": [0.0, 0.8, 0.0],
      "bbox": {"min": [-120, -100, 90], "max": [120, 100, 270]},
      "primitives": [
        {"type": "sphere", "center": [0, 0, 170], "radius": 70,
         "texture": {"type": "checker", "colors": [[0.9, 0.2, 0.1], [0.1, 0.2, 0.9]], "scale": 30}},
        {"type": "box", "min": [-110, -95, 100], "max": [110, -75, 260],
         "texture": {"type": "gradient", "colors": [[0.9, 0.9, 0.3], [0.3, 0.2, 0.1]], "axis": 2,
                     "range": [100, 260]}}
      ]
    }
"""

import json
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import DataError
from ..geometry.vectors import as_vec3, dot3, normalize

HIT_EPS = 1e-9


@dataclass(frozen=True)
class Texture:
    """Procedural surface colour."""

    kind: str = "solid"
    colors: tuple[tuple[float, float, float], ...] = ((0.5, 0.5, 0.5),)
    scale: float = 10.0
    axis: int = 2
    value_range: tuple[float, float] = (0.0, 1.0)

    KINDS = ("solid", "checker", "gradient")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise DataError(f"unknown texture type {self.kind!r}; expected one of {self.KINDS}")
        needed = 1 if self.kind == "solid" else 2
        if len(self.colors) < needed:
            raise DataError(f"{self.kind} texture needs {needed} colour(s)")

    def evaluate(self, points: np.ndarray, uv: Optional[np.ndarray] = None) -> np.ndarray:
        """Colour at surface points.

        Args:
            points: (N, 3) world points.
            uv: Optional (N, 2) surface parameters used by checker textures on
                curved primitives; world-space cells are used otherwise.

        Returns:
            np.ndarray: (N, 3) RGB in [0, 1].
        """
        colors = np.asarray(self.colors, dtype=np.float64)
        n = points.shape[0]
        if self.kind == "solid":
            return np.broadcast_to(colors[0], (n, 3)).copy()
        if self.kind == "checker":
            coords = uv if uv is not None else points
            cells = np.floor(coords / self.scale).astype(np.int64)
            parity = np.sum(cells, axis=1) % 2
            return colors[parity]
        lo, hi = self.value_range
        s = np.clip((points[:, self.axis] - lo) / (hi - lo), 0.0, 1.0)
        return colors[0] * (1.0 - s)[:, None] + colors[1] * s[:, None]

    def to_dict(self) -> dict:
        """Convert to the scene JSON layout."""
        return {
            "type": self.kind,
            "colors": [list(c) for c in self.colors],
            "scale": self.scale,
            "axis": self.axis,
            "range": list(self.value_range),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Texture":
        """Inverse of :meth:`to_dict`."""
        return cls(
            kind=data.get("type", "solid"),
            colors=tuple(tuple(float(x) for x in c) for c in data.get("colors", [[0.5, 0.5, 0.5]])),
            scale=float(data.get("scale", 10.0)),
            axis=int(data.get("axis", 2)),
            value_range=tuple(float(x) for x in data.get("range", (0.0, 1.0))),
        )


class Primitive(ABC):
    """A textured analytic surface."""

    texture: Texture

    @abstractmethod
    def intersect(self, origins: np.ndarray, directions: np.ndarray) -> np.ndarray:
        """Smallest hit parameter t > 0 per ray, inf on miss."""

    @abstractmethod
    def surface_uv(self, points: np.ndarray) -> Optional[np.ndarray]:
        """Surface parameters for texturing, or None for world-space textures."""

    @abstractmethod
    def to_dict(self) -> dict:
        """Convert to the scene JSON layout."""

    def color(self, points: np.ndarray) -> np.ndarray:
        """Texture colour at points on this primitive."""
        return self.texture.evaluate(points, self.surface_uv(points))


@dataclass(frozen=True)
class SpherePrimitive(Primitive):
    """Opaque textured sphere."""

    center: np.ndarray
    radius: float
    texture: Texture = field(default_factory=Texture)

    def intersect(self, origins, directions):
        oc = origins - self.center
        b = dot3(directions, oc)
        c = dot3(oc, oc) - self.radius * self.radius
        disc = b * b - c
        t = np.full(origins.shape[0], np.inf)
        ok = disc > 0
        sq = np.sqrt(disc[ok])
        t0 = -b[ok] - sq
        t1 = -b[ok] + sq
        near = np.where(t0 > HIT_EPS, t0, np.where(t1 > HIT_EPS, t1, np.inf))
        t[ok] = near
        return t

    def surface_uv(self, points):
        # checker cells in degrees of longitude / latitude
        p = (points - self.center) / self.radius
        lon = np.degrees(np.arctan2(p[:, 0], p[:, 2]))
        lat = np.degrees(np.arcsin(np.clip(p[:, 1], -1.0, 1.0)))
        return np.stack([lon, lat], axis=1)

    def to_dict(self):
        return {
            "type": "sphere",
            "center": np.asarray(self.center).tolist(),
            "radius": self.radius,
            "texture": self.texture.to_dict(),
        }


@dataclass(frozen=True)
class BoxPrimitive(Primitive):
    """Opaque axis-aligned box."""

    lo: np.ndarray
    hi: np.ndarray
    texture: Texture = field(default_factory=Texture)

    def intersect(self, origins, directions):
        t_near, t_far = slab_intervals(origins, directions, self.lo, self.hi)
        t = np.where(t_near > HIT_EPS, t_near, np.where(t_far > HIT_EPS, t_far, np.inf))
        return np.where(t_far >= t_near, t, np.inf)

    def surface_uv(self, points):
        return None

    def to_dict(self):
        return {
            "type": "box",
            "min": np.asarray(self.lo).tolist(),
            "max": np.asarray(self.hi).tolist(),
            "texture": self.texture.to_dict(),
        }


@dataclass(frozen=True)
class PlanePrimitive(Primitive):
    """Plane through ``point`` with ``normal``, optionally bounded to a square."""

    point: np.ndarray
    normal: np.ndarray
    half_extent: Optional[float] = None
    texture: Texture = field(default_factory=Texture)

    def intersect(self, origins, directions):
        n = normalize(as_vec3(self.normal))
        denom = dot3(directions, np.broadcast_to(n, directions.shape))
        num = dot3(self.point - origins, np.broadcast_to(n, origins.shape))
        with np.errstate(divide="ignore", invalid="ignore"):
            t = num / denom
        t = np.where((np.abs(denom) > 1e-12) & (t > HIT_EPS), t, np.inf)
        if self.half_extent is not None:
            hit = np.isfinite(t)
            p = origins[hit] + t[hit, None] * directions[hit]
            rel = p - self.point
            u, v = self._basis()
            inside = np.maximum(np.abs(dot3(rel, u)), np.abs(dot3(rel, v))) <= self.half_extent
            t_hit = t[hit]
            t_hit[~inside] = np.inf
            t[hit] = t_hit
        return t

    def _basis(self) -> tuple[np.ndarray, np.ndarray]:
        n = normalize(as_vec3(self.normal))
        helper = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        u = normalize(np.cross(n, helper))
        return u, np.cross(n, u)

    def surface_uv(self, points):
        return None

    def to_dict(self):
        return {
            "type": "plane",
            "point": np.asarray(self.point).tolist(),
            "normal": np.asarray(self.normal).tolist(),
            "half_extent": self.half_extent,
            "texture": self.texture.to_dict(),
        }


def slab_intervals(
    origins: np.ndarray, directions: np.ndarray, lo: np.ndarray, hi: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Entry/exit parameters of rays against an axis-aligned box (no t > 0 clamp).

    Axes along which a ray is parallel contribute (-inf, inf) when the origin
    is inside the slab and an empty interval otherwise.
    """
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    t_near = np.full(origins.shape[0], -np.inf)
    t_far = np.full(origins.shape[0], np.inf)
    for axis in range(3):
        o = origins[:, axis]
        d = directions[:, axis]
        parallel = d == 0
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (lo[axis] - o) / d
            t2 = (hi[axis] - o) / d
        a = np.minimum(t1, t2)
        b = np.maximum(t1, t2)
        outside = parallel & ((o < lo[axis]) | (o > hi[axis]))
        a = np.where(parallel, np.where(outside, np.inf, -np.inf), a)
        b = np.where(parallel, np.where(outside, -np.inf, np.inf), b)
        t_near = np.maximum(t_near, a)
        t_far = np.minimum(t_far, b)
    return t_near, t_far


@dataclass
class AnalyticScene:
    """A set of opaque textured primitives in front of a uniform background."""

    primitives: list[Primitive]
    background: tuple[float, float, float] = (0.0, 0.8, 0.0)
    bbox_min: Optional[np.ndarray] = None
    bbox_max: Optional[np.ndarray] = None

    def trace(self, origins: np.ndarray, directions: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Trace rays into the scene.

        Args:
            origins: (N, 3) ray origins.
            directions: (N, 3) unit directions.

        Returns:
            tuple: ``(colors, hit_mask, t)`` with colors (N, 3) (background
                where nothing is hit), the boolean foreground mask and the hit
                parameter (inf on miss).
        """
        n = origins.shape[0]
        best_t = np.full(n, np.inf)
        best_prim = np.full(n, -1, dtype=np.int64)
        for k, prim in enumerate(self.primitives):
            t = prim.intersect(origins, directions)
            closer = t < best_t
            best_t[closer] = t[closer]
            best_prim[closer] = k
        colors = np.broadcast_to(np.asarray(self.background, dtype=np.float64), (n, 3)).copy()
        for k, prim in enumerate(self.primitives):
            sel = best_prim == k
            if np.any(sel):
                points = origins[sel] + best_t[sel, None] * directions[sel]
                colors[sel] = prim.color(points)
        return colors, best_prim >= 0, best_t

    def to_dict(self) -> dict:
        """Convert to the scene JSON layout."""
        data = {
            "background": list(self.background),
            "primitives": [p.to_dict() for p in self.primitives],
        }
        if self.bbox_min is not None and self.bbox_max is not None:
            data["bbox"] = {"min": np.asarray(self.bbox_min).tolist(), "max": np.asarray(self.bbox_max).tolist()}
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "AnalyticScene":
        """Parse the scene JSON layout.

        Raises:
            DataError: On unknown primitive types or missing fields.
        """
        try:
            prims: list[Primitive] = []
            for item in data["primitives"]:
                kind = item["type"]
                texture = Texture.from_dict(item.get("texture", {}))
                if kind == "sphere":
                    prims.append(SpherePrimitive(as_vec3(item["center"]), float(item["radius"]), texture))
                elif kind == "box":
                    prims.append(BoxPrimitive(as_vec3(item["min"]), as_vec3(item["max"]), texture))
                elif kind == "plane":
                    half = item.get("half_extent")
                    prims.append(
                        PlanePrimitive(
                            as_vec3(item["point"]),
                            as_vec3(item["normal"]),
                            None if half is None else float(half),
                            texture,
                        )
                    )
                else:
                    raise DataError(f"unknown primitive type {kind!r}")
            bbox = data.get("bbox")
            return cls(
                primitives=prims,
                background=tuple(float(c) for c in data.get("background", (0.0, 0.8, 0.0))),
                bbox_min=None if bbox is None else as_vec3(bbox["min"]),
                bbox_max=None if bbox is None else as_vec3(bbox["max"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, DataError):
                raise
            raise DataError(f"invalid scene description: {e}") from e

    @classmethod
    def load(cls, path: str) -> "AnalyticScene":
        """Read a scene JSON file."""
        p = Path(path)
        if not p.exists():
            raise FileNotFoundError(f"Scene file not found: {path}")
        try:
            data = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise DataError(f"scene file {path} is not valid JSON: {e}") from e
        return cls.from_dict(data)

    def save(self, path: str) -> None:
        """Write the scene JSON file."""
        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")


def default_scene() -> AnalyticScene:
    """Checkered sphere resting above a gradient floor slab, green background.

    The subject sits 170 mm in front of the array plane, inside a bounding
    box that also contains the floor slab.
    """
    sphere = SpherePrimitive(
        center=np.array([0.0, 0.0, 170.0]),
        radius=70.0,
        texture=Texture("checker", ((0.9, 0.3, 0.1), (0.1, 0.3, 0.8)), scale=30.0),
    )
    floor = BoxPrimitive(
        lo=np.array([-110.0, -95.0, 100.0]),
        hi=np.array([110.0, -75.0, 260.0]),
        texture=Texture("gradient", ((0.95, 0.9, 0.4), (0.4, 0.2, 0.1)), axis=2, value_range=(100.0, 260.0)),
    )
    return AnalyticScene(
        primitives=[sphere, floor],
        background=(0.0, 0.8, 0.0),
        bbox_min=np.array([-120.0, -100.0, 90.0]),
        bbox_max=np.array([120.0, 100.0, 270.0]),
    )


def uniform_scene(color: tuple[float, float, float]) -> AnalyticScene:
    """A scene whose every ray, hit or not, returns ``color``."""
    sphere = SpherePrimitive(np.array([0.0, 0.0, 170.0]), 70.0, Texture("solid", (tuple(color),)))
    return AnalyticScene(
        primitives=[sphere],
        background=tuple(color),
        bbox_min=np.array([-120.0, -100.0, 90.0]),
        bbox_max=np.array([120.0, 100.0, 270.0]),
    )
