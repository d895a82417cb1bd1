"""
Loss of one ray batch as a closure over field queries.

A :class:`BatchObjective` renders the batch through a :class:`FieldTape`,
evaluates the three losses and hands back the gradient of the total loss
with respect to every recorded query, in query order:

    0  coarse samples of every ray that hits the box
    1  fine samples (when the fine pass is enabled)
    2  void points of foreground rays (when the geometry loss has points)
    3  the same void points through the fine network (separate fine network only)

With a separate fine network both regularizers are summed over the two
networks, as the photometric loss is.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..neuralfield import FieldTape, SampleBatch
from ..raybank import BBox, RayBank
from ..renderer import RenderConfig, composite_backward, estimate_depth, integrate_backward, render_rays
from .losses import (
    loss_geometry,
    loss_geometry_grad,
    loss_photometric,
    loss_photometric_grad,
    loss_visual_hull,
    loss_visual_hull_grad,
    sample_void_points,
)


@dataclass
class RayBatch:
    """Rays of one optimization step."""

    origins: np.ndarray
    directions: np.ndarray
    colors: np.ndarray
    mirror_index: np.ndarray
    foreground: np.ndarray

    @classmethod
    def from_bank(cls, bank: RayBank, indices: np.ndarray) -> "RayBatch":
        """Gather rays of a bank by index."""
        return cls(
            origins=bank.origins[indices],
            directions=bank.directions[indices],
            colors=bank.colors[indices],
            mirror_index=bank.mirror_index[indices],
            foreground=bank.foreground[indices],
        )

    def __len__(self) -> int:
        return int(self.origins.shape[0])


class BatchObjective:
    """Total training loss of a ray batch, callable on a :class:`FieldTape`.

    After a call, :attr:`parts` holds ``(L_c, L_v, L_g)`` and :attr:`depth`
    the supervision depth of every ray (NaN for rays missing the box or
    background rays).
    """

    def __init__(
        self,
        batch: RayBatch,
        bbox: BBox,
        render_config: RenderConfig,
        lam: float,
        tau: float,
        warp: bool,
        n_void: int = 1,
        seed: Optional[int] = None,
        depth: Optional[np.ndarray] = None,
    ):
        """Initialize the objective.

        Args:
            batch: Rays and their target colors.
            bbox: Sampling box.
            render_config: Sample counts and background.
            lam: Weight of the two regularizers; 0 skips them.
            tau: Density threshold of the depth estimate.
            warp: Apply the warping field.
            n_void: Void points per foreground ray.
            seed: Seed of the jitter generator; None samples
                deterministically. Every call reuses the same stream.
            depth: Fixed (R,) supervision depth; None estimates it from the
                coarse pass.
        """
        self.batch = batch
        self.bbox = bbox
        self.render_config = render_config
        self.lam = lam
        self.tau = tau
        self.warp = warp
        self.n_void = n_void
        self.seed = seed
        self.fixed_depth = depth
        self.parts = (0.0, 0.0, 0.0)
        self.depth: Optional[np.ndarray] = None

    def __call__(self, tape: FieldTape):
        """Evaluate the loss and the gradient of every query."""
        rng = None if self.seed is None else np.random.default_rng(self.seed)
        batch, cfg = self.batch, self.render_config
        bg = cfg.background_rgb()
        result = render_rays(
            tape.query, batch.origins, batch.directions, batch.mirror_index, self.bbox, cfg, rng=rng, warp=self.warp
        )
        L_c = loss_photometric(result.rgb_coarse, result.rgb_fine, batch.colors)
        g_coarse, g_fine = loss_photometric_grad(result.rgb_coarse, result.rgb_fine, batch.colors)
        if result.fine is None:
            g_coarse = g_coarse + g_fine

        rows = result.rows
        output_grads = []
        L_v = L_g = 0.0
        self.depth = np.full(len(batch), np.nan)
        if result.coarse is None:
            self.parts = (L_c, L_v, L_g)
            return L_c, output_grads

        coarse = result.coarse
        g_rgb, g_opacity = composite_backward(g_coarse[rows], bg)
        g_sigma, g_colors = integrate_backward(coarse.samples, coarse.weights, g_rgb, g_opacity)
        foreground = batch.foreground[rows]
        if self.lam > 0:
            sigma_b = coarse.samples.sigma[~foreground]
            L_v = loss_visual_hull(sigma_b)
            g_sigma[~foreground] += self.lam * loss_visual_hull_grad(sigma_b)
        output_grads.append((g_colors.reshape(-1, 3), g_sigma.reshape(-1)))

        two_networks = result.fine is not None and tape.params.config.separate_fine_network
        if result.fine is not None:
            fine = result.fine
            g_rgb, g_opacity = composite_backward(g_fine[rows], bg)
            g_sigma, g_colors = integrate_backward(fine.samples, fine.weights, g_rgb, g_opacity)
            if two_networks and self.lam > 0:
                sigma_b = fine.samples.sigma[~foreground]
                L_v += loss_visual_hull(sigma_b)
                g_sigma[~foreground] += self.lam * loss_visual_hull_grad(sigma_b)
            output_grads.append((g_colors.reshape(-1, 3), g_sigma.reshape(-1)))

        fg_rows = rows[foreground]
        if self.fixed_depth is not None:
            depth = np.asarray(self.fixed_depth, dtype=np.float64)[fg_rows]
        else:
            depth = estimate_depth(coarse.samples.select(foreground), self.tau)
        self.depth[fg_rows] = depth

        if self.lam > 0 and fg_rows.size:
            void_rows, t = sample_void_points(result.t_near[fg_rows], depth, self.n_void, rng)
            if void_rows.size:
                ray = fg_rows[void_rows]
                points = batch.origins[ray] + t[:, None] * batch.directions[ray]
                networks = ("coarse", "fine") if two_networks else ("coarse",)
                for network in networks:
                    _, sigma_g = tape.query(
                        SampleBatch(points, batch.directions[ray], batch.mirror_index[ray], warp=self.warp, network=network)
                    )
                    L_g += loss_geometry(sigma_g)
                    output_grads.append((None, self.lam * loss_geometry_grad(sigma_g)))

        self.parts = (L_c, L_v, L_g)
        return L_c + self.lam * (L_v + L_g), output_grads

