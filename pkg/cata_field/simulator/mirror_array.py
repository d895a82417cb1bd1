"""
Honeycomb sphere-mirror array template.

Mirror centers lie on the z = 0 plane on a hexagonal lattice: rows run
along x with a spacing of one pitch, consecutive rows are pitch * sqrt(3)/2
apart in y and offset by half a pitch. Each mirror sits in a pointy-top
hexagon whose flat-to-flat width equals the pitch; the hexagon corners are
the calibration markers.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from ..errors import ConfigError, DataError
from ..geometry import SphereMirror

logger = logging.getLogger(__name__)

DEFAULT_DIAMETER_MM = 50.0
DEFAULT_PITCH_MM = 52.0

# mirror count -> row lengths (odd number of rows, odd middle row)
STANDARD_LAYOUTS: dict[int, tuple[int, ...]] = {
    1: (1,),
    5: (2, 1, 2),
    7: (2, 3, 2),
    13: (2, 3, 3, 3, 2),
    19: (3, 4, 5, 4, 3),
    25: (5, 5, 5, 5, 5),
}
DEFAULT_LAYOUT = STANDARD_LAYOUTS[25]


def layout_for_count(count: int) -> tuple[int, ...]:
    """Row layout for one of the standard mirror counts.

    Args:
        count: Number of mirrors.

    Returns:
        tuple[int, ...]: Row lengths, top to bottom.

    Raises:
        ConfigError: If no standard layout exists for ``count``.
    """
    try:
        return STANDARD_LAYOUTS[count]
    except KeyError:
        raise ConfigError(
            f"no standard honeycomb layout with {count} mirrors; choose one of {sorted(STANDARD_LAYOUTS)}"
        ) from None


@dataclass(frozen=True)
class MirrorArrayTemplate:
    """Idealized (or perturbed) mirror array plus its calibration markers."""

    mirrors: tuple[SphereMirror, ...]
    radius: float
    pitch: float
    corners: np.ndarray
    anchor_index: int
    rows_layout: tuple[int, ...] = field(default=DEFAULT_LAYOUT)

    @property
    def count(self) -> int:
        """Number of mirrors."""
        return len(self.mirrors)

    @property
    def centers(self) -> np.ndarray:
        """(M, 3) mirror centers."""
        return np.stack([m.center for m in self.mirrors])

    @property
    def radii(self) -> np.ndarray:
        """(M,) mirror radii."""
        return np.array([m.radius for m in self.mirrors], dtype=np.float64)

    @property
    def anchor(self) -> SphereMirror:
        """The central mirror that pins the reference space."""
        return self.mirrors[self.anchor_index]

    def adjacent_pairs(self) -> list[tuple[int, int]]:
        """Index pairs of lattice neighbours (ideal spacing of one pitch)."""
        ideal = build_array_template(self.rows_layout, 2.0 * self.radius, self.pitch).centers
        pairs = []
        for i in range(len(ideal)):
            for j in range(i + 1, len(ideal)):
                if abs(np.linalg.norm(ideal[i] - ideal[j]) - self.pitch) < 1e-6 * self.pitch:
                    pairs.append((i, j))
        return pairs

    def extent_mm(self) -> float:
        """Largest distance of any mirror rim from the array center."""
        return float(np.max(np.linalg.norm(self.centers[:, :2], axis=1)) + self.radius)

    def with_centers(self, centers: np.ndarray) -> "MirrorArrayTemplate":
        """Copy of this template with moved mirror centers (markers unchanged)."""
        mirrors = tuple(
            SphereMirror(center=c, radius=m.radius, index=m.index) for m, c in zip(self.mirrors, centers)
        )
        return replace(self, mirrors=mirrors)

    def to_dict(self) -> dict:
        """Convert to a JSON-friendly dictionary."""
        return {
            "rows_layout": list(self.rows_layout),
            "radius": self.radius,
            "pitch": self.pitch,
            "anchor_index": self.anchor_index,
            "mirrors": [m.to_dict() for m in self.mirrors],
            "corners": self.corners.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MirrorArrayTemplate":
        """Inverse of :meth:`to_dict`."""
        try:
            mirrors = tuple(
                SphereMirror(center=m["center"], radius=float(m["radius"]), index=int(m["index"]))
                for m in data["mirrors"]
            )
            return cls(
                mirrors=mirrors,
                radius=float(data["radius"]),
                pitch=float(data["pitch"]),
                corners=np.array(data["corners"], dtype=np.float64).reshape(-1, 3),
                anchor_index=int(data["anchor_index"]),
                rows_layout=tuple(int(n) for n in data["rows_layout"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise DataError(f"malformed mirror array description: {e}") from e


def _row_positions(rows_layout: Sequence[int], pitch: float) -> list[tuple[int, int, float, float]]:
    n_rows = len(rows_layout)
    mid = n_rows // 2
    row_height = pitch * np.sqrt(3.0) / 2.0
    cells = []
    for r, n in enumerate(rows_layout):
        k = abs(r - mid)
        xs = (np.arange(n) - (n - 1) / 2.0) * pitch
        # rows at odd distance from the middle sit on half-pitch positions
        if (n + 1) % 2 != k % 2:
            xs = xs + pitch / 2.0
        y = (mid - r) * row_height
        for c, x in enumerate(xs):
            cells.append((r, c, float(x), float(y)))
    return cells


def _hexagon_corners(centers_xy: np.ndarray, pitch: float) -> np.ndarray:
    circumradius = pitch / np.sqrt(3.0)
    angles = np.radians(30.0 + 60.0 * np.arange(6))
    offsets = np.stack([np.cos(angles), np.sin(angles)], axis=1) * circumradius
    corners = (centers_xy[:, None, :] + offsets[None, :, :]).reshape(-1, 2)
    _, first = np.unique(np.round(corners, 6), axis=0, return_index=True)
    unique = corners[np.sort(first)]
    return np.hstack([unique, np.zeros((unique.shape[0], 1))])


def build_array_template(
    rows_layout: Sequence[int] = DEFAULT_LAYOUT,
    mirror_diameter_mm: float = DEFAULT_DIAMETER_MM,
    pitch_mm: float = DEFAULT_PITCH_MM,
) -> MirrorArrayTemplate:
    """Build the ideal honeycomb array.

    Args:
        rows_layout: Row lengths, top to bottom. Must have an odd number of
            rows and an odd-length middle row, whose middle cell is the anchor.
        mirror_diameter_mm: Sphere diameter.
        pitch_mm: Hexagon flat-to-flat width, i.e. the distance between
            adjacent mirror centers.

    Returns:
        MirrorArrayTemplate: Mirrors centered on the z = 0 lattice, anchor at
            the origin, deduplicated hexagon corner markers.

    Raises:
        ConfigError: On non-positive sizes or a layout without a central cell.
    """
    if mirror_diameter_mm <= 0 or pitch_mm <= 0:
        raise ConfigError(
            f"mirror diameter and pitch must be positive, got {mirror_diameter_mm} and {pitch_mm}"
        )
    rows_layout = tuple(int(n) for n in rows_layout)
    if not rows_layout or any(n <= 0 for n in rows_layout):
        raise ConfigError(f"invalid honeycomb layout {rows_layout}")
    mid = len(rows_layout) // 2
    if len(rows_layout) % 2 == 0 or rows_layout[mid] % 2 == 0:
        raise ConfigError(
            f"honeycomb layout {rows_layout} needs an odd number of rows and an odd middle row"
        )
    if mirror_diameter_mm > pitch_mm:
        logger.warning(
            "mirror diameter %.1f mm exceeds the pitch %.1f mm; neighbouring mirrors overlap",
            mirror_diameter_mm,
            pitch_mm,
        )

    radius = mirror_diameter_mm / 2.0
    cells = _row_positions(rows_layout, pitch_mm)
    mirrors = []
    anchor_index = -1
    for index, (r, c, x, y) in enumerate(cells):
        mirrors.append(SphereMirror(center=np.array([x, y, 0.0]), radius=radius, index=index))
        if r == mid and c == rows_layout[mid] // 2:
            anchor_index = index

    centers_xy = np.array([[x, y] for _, _, x, y in cells])
    return MirrorArrayTemplate(
        mirrors=tuple(mirrors),
        radius=radius,
        pitch=pitch_mm,
        corners=_hexagon_corners(centers_xy, pitch_mm),
        anchor_index=anchor_index,
        rows_layout=rows_layout,
    )


def perturb_template(
    template: MirrorArrayTemplate,
    sigma_mm: float,
    seed: Optional[int] = None,
    perturb_anchor: bool = False,
) -> MirrorArrayTemplate:
    """Displace mirror centers with iid Gaussian noise in the array plane.

    Markers stay at their ideal positions (they are printed on the board).

    Args:
        template: Ideal template.
        sigma_mm: Standard deviation of the x and y offsets.
        seed: Seed of the noise generator.
        perturb_anchor: Whether the anchor mirror is displaced as well.

    Returns:
        MirrorArrayTemplate: Perturbed copy; identical to the input when
            ``sigma_mm`` is 0.

    Raises:
        ConfigError: If ``sigma_mm`` is negative.
    """
    if sigma_mm < 0:
        raise ConfigError(f"perturbation sigma must be non-negative, got {sigma_mm}")
    if sigma_mm == 0:
        return template
    rng = np.random.default_rng(seed)
    offsets = rng.normal(0.0, sigma_mm, size=(template.count, 2))
    if not perturb_anchor:
        offsets[template.anchor_index] = 0.0
    centers = template.centers.copy()
    centers[:, :2] += offsets
    return template.with_centers(centers)
