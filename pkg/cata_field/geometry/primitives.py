"""
Rays, sphere mirrors and the reflection law.

Units are millimeters throughout. Scalar entry points take and return single
vectors; the ``*_many`` variants broadcast over leading axes and are what the
simulator and ray restoration use internally.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import GeometryError
from .vectors import UNIT_TOLERANCE, as_vec3, dot3, norm3

DISCRIMINANT_EPS = 1e-12


@dataclass(frozen=True)
class Ray:
    """A half line r(t) = origin + t * direction."""

    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        origin = as_vec3(self.origin).reshape(3)
        direction = as_vec3(self.direction).reshape(3)
        if abs(float(norm3(direction)) - 1.0) > 1e-12:
            raise GeometryError(f"ray direction must be unit length, got norm {float(norm3(direction))!r}")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "direction", direction)

    @classmethod
    def towards(cls, origin, direction) -> "Ray":
        """Build a ray, normalizing the direction first."""
        d = as_vec3(direction).reshape(3)
        return cls(origin, d / float(norm3(d)))

    def at(self, t: float) -> np.ndarray:
        """Point at parameter ``t``."""
        return self.origin + t * self.direction


@dataclass(frozen=True)
class SphereMirror:
    """A convex spherical reflector."""

    center: np.ndarray
    radius: float
    index: int

    def __post_init__(self):
        if not self.radius > 0:
            raise GeometryError(f"mirror radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", as_vec3(self.center).reshape(3).copy())

    def contains(self, point) -> bool:
        """Whether ``point`` lies strictly inside the sphere."""
        return bool(norm3(as_vec3(point) - self.center) < self.radius)

    def to_dict(self) -> dict:
        """Convert to a JSON-friendly dictionary.

        Returns:
            dict: center, radius and index of the mirror.
        """
        return {"center": self.center.tolist(), "radius": self.radius, "index": self.index}


@dataclass(frozen=True)
class Hit:
    """Nearest ray/sphere intersection."""

    t: float
    point: np.ndarray
    normal: np.ndarray


def _check_unit(name: str, v: np.ndarray) -> None:
    err = np.max(np.abs(norm3(v) - 1.0))
    if err > UNIT_TOLERANCE:
        raise GeometryError(f"{name} must be unit length (max deviation {err:.3e})")


def reflect_many(d_in: np.ndarray, n: np.ndarray) -> np.ndarray:
    """Mirror directions across normals: d - 2 (n·d) n, no validation."""
    k = 2.0 * dot3(n, d_in)
    return d_in - k[..., None] * n


def reflect(d_in, n) -> np.ndarray:
    """Reflect a unit direction about a unit normal.

    Args:
        d_in: Incoming unit direction(s), shape (..., 3).
        n: Unit surface normal(s), shape (..., 3).

    Returns:
        np.ndarray: d_in - 2 (nᵀ d_in) n.

    Raises:
        GeometryError: If either input deviates from unit length by more than 1e-9.
    """
    d_in = as_vec3(d_in)
    n = as_vec3(n)
    _check_unit("incoming direction", d_in)
    _check_unit("normal", n)
    return reflect_many(d_in, n)


def intersect_spheres_many(
    origins: np.ndarray,
    directions: np.ndarray,
    centers: np.ndarray,
    radii: np.ndarray,
    t_min: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Nearest front-face hit of every ray against a set of spheres.

    Only the entry point (the face turned towards the ray origin) counts; rays
    starting inside a sphere do not hit it. Tangent rays within the
    discriminant tolerance are treated as misses.

    Args:
        origins: (N, 3) ray origins.
        directions: (N, 3) unit directions.
        centers: (M, 3) sphere centers.
        radii: (M,) sphere radii.
        t_min: Hits at or below this parameter are ignored.

    Returns:
        tuple: ``(t, which)`` with ``t`` of shape (N,) (inf on miss) and
            ``which`` the index into ``centers`` of the hit sphere (-1 on miss).
    """
    n_rays = origins.shape[0]
    best_t = np.full(n_rays, np.inf)
    best_idx = np.full(n_rays, -1, dtype=np.int64)
    for m in range(centers.shape[0]):
        oc = origins - centers[m]
        b = dot3(directions, oc)
        c = dot3(oc, oc) - radii[m] * radii[m]
        disc = b * b - c
        ok = disc > DISCRIMINANT_EPS
        t0 = np.full(n_rays, np.inf)
        t0[ok] = -b[ok] - np.sqrt(disc[ok])
        # entry point only; origin inside the sphere means t0 <= 0
        valid = ok & (t0 > t_min) & (t0 < best_t)
        best_t[valid] = t0[valid]
        best_idx[valid] = m
    return best_t, best_idx


def intersect_ray_sphere(ray: Ray, mirror: SphereMirror) -> Optional[Hit]:
    """Nearest camera-facing intersection of a ray with a sphere mirror.

    Args:
        ray: Ray with unit direction.
        mirror: Sphere to test.

    Returns:
        Optional[Hit]: Hit with t > 0, the surface point and outward unit
            normal, or None on a miss, a tangency or an origin inside the sphere.
    """
    t, which = intersect_spheres_many(
        ray.origin[None, :],
        ray.direction[None, :],
        mirror.center[None, :],
        np.array([mirror.radius]),
    )
    if which[0] < 0:
        return None
    t_hit = float(t[0])
    point = ray.origin + t_hit * ray.direction
    normal = (point - mirror.center) / mirror.radius
    return Hit(t=t_hit, point=point, normal=normal)
