"""
Elementwise vector helpers.

All helpers work on arrays whose last axis has length 3 and are written as
explicit per-component arithmetic instead of BLAS products, so the value
computed for one ray never depends on how many rays share the call. The
simulator and the ray restoration rely on this to agree bit for bit.
"""

import numpy as np

UNIT_TOLERANCE = 1e-9
ROTATION_TOLERANCE = 1e-9


def as_vec3(v) -> np.ndarray:
    """Convert input to a float64 array with a trailing axis of length 3.

    Args:
        v: Array-like with last dimension 3.

    Returns:
        np.ndarray: float64 view/copy of the input.

    Raises:
        ValueError: If the trailing dimension is not 3.
    """
    arr = np.asarray(v, dtype=np.float64)
    if arr.shape[-1:] != (3,):
        raise ValueError(f"expected trailing dimension 3, got shape {arr.shape}")
    return arr


def dot3(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Componentwise dot product over the last axis."""
    return a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1] + a[..., 2] * b[..., 2]


def norm3(v: np.ndarray) -> np.ndarray:
    """Euclidean norm over the last axis."""
    return np.sqrt(dot3(v, v))


def normalize(v: np.ndarray) -> np.ndarray:
    """Scale vectors to unit length over the last axis."""
    return v / norm3(v)[..., None]


def cross3(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cross product over the last axis."""
    return np.stack(
        [
            a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1],
            a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2],
            a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0],
        ],
        axis=-1,
    )


def apply_matrix(M: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Compute M @ v for every vector in ``v`` without calling BLAS.

    Args:
        M: (3, 3) matrix.
        v: (..., 3) vectors.

    Returns:
        np.ndarray: (..., 3) transformed vectors.
    """
    M = np.asarray(M, dtype=np.float64)
    return v[..., 0, None] * M[:, 0] + v[..., 1, None] * M[:, 1] + v[..., 2, None] * M[:, 2]


def is_unit(v: np.ndarray, tol: float = UNIT_TOLERANCE) -> bool:
    """Check whether every vector in ``v`` has unit length within ``tol``."""
    return bool(np.all(np.abs(norm3(as_vec3(v)) - 1.0) <= tol))


def is_rotation(R: np.ndarray, tol: float = ROTATION_TOLERANCE) -> bool:
    """Check RᵀR = I and det(R) = +1 within ``tol``."""
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3):
        return False
    orthogonal = np.max(np.abs(R.T @ R - np.eye(3))) <= tol
    return bool(orthogonal and abs(np.linalg.det(R) - 1.0) <= tol)


def rotation_geodesic(R_a: np.ndarray, R_b: np.ndarray) -> float:
    """Angle in radians of the relative rotation R_aᵀ R_b.

    Uses the axis-angle magnitude of the skew part together with the trace so
    that very small angles keep full precision.
    """
    rel = np.asarray(R_a, dtype=np.float64).T @ np.asarray(R_b, dtype=np.float64)
    skew = np.array([rel[2, 1] - rel[1, 2], rel[0, 2] - rel[2, 0], rel[1, 0] - rel[0, 1]])
    sin_theta = 0.5 * np.linalg.norm(skew)
    cos_theta = 0.5 * (np.trace(rel) - 1.0)
    return float(np.arctan2(sin_theta, cos_theta))
