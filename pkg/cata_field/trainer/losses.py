"""
Training losses.

    L_total = L_c + lambda * (L_v + L_g)

L_c is the photometric error of the coarse and fine renders, L_v penalizes
density along background rays (visual hull) and L_g penalizes density at
void points sampled in front of the estimated depth of foreground rays.
Each loss has a companion ``*_grad`` returning the gradient of the loss
with respect to its inputs.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

logger = logging.getLogger(__name__)


@dataclass
class LossBreakdown:
    """Loss values of one optimization step."""

    epoch: int
    step: int
    L_c: float
    L_v: float
    L_g: float
    L_total: float
    tau: float

    @classmethod
    def combine(cls, epoch: int, step: int, L_c: float, L_v: float, L_g: float, lam: float, tau: float) -> "LossBreakdown":
        """Assemble a breakdown with ``L_total = L_c + lam * (L_v + L_g)``."""
        return cls(epoch=epoch, step=step, L_c=L_c, L_v=L_v, L_g=L_g, L_total=L_c + lam * (L_v + L_g), tau=tau)

    def to_dict(self) -> dict:
        """Row of the loss log."""
        return asdict(self)


def loss_photometric(rgb_coarse: np.ndarray, rgb_fine: np.ndarray, target: np.ndarray) -> float:
    """Mean squared error of the coarse render plus that of the fine render."""
    target = np.asarray(target, dtype=np.float64)
    return float(np.mean((rgb_coarse - target) ** 2) + np.mean((rgb_fine - target) ** 2))


def loss_photometric_grad(
    rgb_coarse: np.ndarray, rgb_fine: np.ndarray, target: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of :func:`loss_photometric` w.r.t. both renders."""
    target = np.asarray(target, dtype=np.float64)
    n = target.size
    return 2.0 * (rgb_coarse - target) / n, 2.0 * (rgb_fine - target) / n


def _mean_square(sigma: np.ndarray, name: str) -> float:
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.size == 0:
        logger.debug("%s: empty sample set, loss is 0", name)
        return 0.0
    return float(np.mean(sigma**2))


def _mean_square_grad(sigma: np.ndarray) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.size == 0:
        return np.zeros_like(sigma)
    return 2.0 * sigma / sigma.size


def loss_visual_hull(sigma_background: np.ndarray) -> float:
    """Mean squared density at samples of background rays (0 when empty)."""
    return _mean_square(sigma_background, "visual hull loss")


def loss_visual_hull_grad(sigma_background: np.ndarray) -> np.ndarray:
    """Gradient of :func:`loss_visual_hull` w.r.t. the densities."""
    return _mean_square_grad(sigma_background)


def loss_geometry(sigma_void: np.ndarray) -> float:
    """Mean squared density at void points (0 when there are none)."""
    return _mean_square(sigma_void, "geometry loss")


def loss_geometry_grad(sigma_void: np.ndarray) -> np.ndarray:
    """Gradient of :func:`loss_geometry` w.r.t. the densities."""
    return _mean_square_grad(sigma_void)


def sample_void_points(
    t_near: np.ndarray,
    depth: np.ndarray,
    n_void: int,
    rng: Optional[np.random.Generator] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Ray parameters of void points strictly in front of the estimated depth.

    Each ray with ``depth > t_near`` receives ``n_void`` parameters uniform
    in ``[t_near, depth)``; the other rays receive none.

    Args:
        t_near: (R,) entry distance of each ray into the box.
        depth: (R,) supervision depth (treated as a constant).
        n_void: Void points per ray.
        rng: Generator; None uses the deterministic quantiles (k + 0.5) / n.

    Returns:
        tuple: ``(rows (K,), t (K,))`` ray index and parameter of each point.
    """
    t_near = np.asarray(t_near, dtype=np.float64).reshape(-1)
    depth = np.asarray(depth, dtype=np.float64).reshape(-1)
    eligible = np.flatnonzero(depth > t_near)
    if eligible.size == 0 or n_void < 1:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    if rng is None:
        u = np.broadcast_to((np.arange(n_void) + 0.5) / n_void, (eligible.size, n_void))
    else:
        u = rng.random((eligible.size, n_void))
    span = depth[eligible] - t_near[eligible]
    t = t_near[eligible, None] + u * span[:, None]
    rows = np.repeat(eligible, n_void)
    return rows, t.reshape(-1)
