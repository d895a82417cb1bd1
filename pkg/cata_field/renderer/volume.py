"""
Volume rendering along sampled rays, its reverse pass, and the thresholded
depth estimate used as the geometry supervision signal.

With a_i = sigma_i * delta_i:

    W_i = exp(-sum_{j<i} a_j)        transmittance
    w_i = W_i (1 - exp(-a_i))        sample weight
    C   = sum_i w_i c_i              color (before background composite)
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import DataError


@dataclass
class RaySampleSet:
    """Samples of R rays with S samples each.

    Attributes:
        t: (R, S) sample parameters (mm), non-decreasing per ray.
        delta: (R, S) interval lengths in field length units.
        sigma: (R, S) densities.
        colors: (R, S, 3) sample colors.
    """

    t: np.ndarray
    delta: np.ndarray
    sigma: np.ndarray
    colors: np.ndarray

    @classmethod
    def build(
        cls,
        t: np.ndarray,
        t_far,
        sigma: np.ndarray,
        colors: Optional[np.ndarray] = None,
        length_unit: float = 1.0,
    ) -> "RaySampleSet":
        """Assemble a sample set with delta_i = (t_{i+1} - t_i) / length_unit.

        The last interval runs to ``t_far``. Coincident samples are accepted;
        their zero-length interval carries no weight.

        Raises:
            DataError: If samples decrease or lie beyond ``t_far``.
        """
        t = np.atleast_2d(np.asarray(t, dtype=np.float64))
        t_far = np.broadcast_to(np.asarray(t_far, dtype=np.float64).reshape(-1, 1), (t.shape[0], 1))
        delta = np.diff(np.concatenate([t, t_far], axis=1), axis=1)
        if np.any(delta < 0):
            raise DataError("ray samples must be non-decreasing and not exceed t_far")
        sigma = np.asarray(sigma, dtype=np.float64).reshape(t.shape)
        if colors is None:
            colors = np.zeros(t.shape + (3,))
        colors = np.asarray(colors, dtype=np.float64).reshape(t.shape + (3,))
        return cls(t=t, delta=delta / length_unit, sigma=sigma, colors=colors)

    def select(self, rows) -> "RaySampleSet":
        """Sample set of a subset of the rays."""
        return RaySampleSet(t=self.t[rows], delta=self.delta[rows], sigma=self.sigma[rows], colors=self.colors[rows])

    @property
    def transmittance(self) -> np.ndarray:
        """(R, S) W_i, with W_1 = 1."""
        return _transmittance(self.sigma * self.delta)


def _transmittance(a: np.ndarray) -> np.ndarray:
    exclusive = np.concatenate([np.zeros(a.shape[:-1] + (1,)), np.cumsum(a, axis=-1)[..., :-1]], axis=-1)
    return np.exp(-exclusive)


def _weights(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    T = _transmittance(a)
    return T * -np.expm1(-a), T


def integrate(samples: RaySampleSet) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Composite samples front to back.

    Returns:
        tuple: ``(rgb (R, 3), opacity (R,), weights (R, S))``; the opacity is
            the sum of the weights.
    """
    w, _ = _weights(samples.sigma * samples.delta)
    rgb = np.einsum("rs,rsc->rc", w, samples.colors)
    return rgb, w.sum(axis=-1), w


def integrate_backward(
    samples: RaySampleSet,
    weights: np.ndarray,
    g_rgb: Optional[np.ndarray] = None,
    g_opacity: Optional[np.ndarray] = None,
    g_weights: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Reverse pass of :func:`integrate`.

    Args:
        samples: Sample set of the forward pass.
        weights: Weights returned by the forward pass.
        g_rgb: (R, 3) gradient of the color.
        g_opacity: (R,) gradient of the opacity.
        g_weights: (R, S) direct gradient of the weights.

    Returns:
        tuple: ``(g_sigma (R, S), g_colors (R, S, 3))``.
    """
    R, S = samples.sigma.shape
    g_w = np.zeros((R, S))
    g_colors = np.zeros((R, S, 3))
    if g_rgb is not None:
        g_w += np.einsum("rsc,rc->rs", samples.colors, g_rgb)
        g_colors = weights[..., None] * g_rgb[:, None, :]
    if g_opacity is not None:
        g_w += g_opacity[:, None]
    if g_weights is not None:
        g_w += g_weights

    a = samples.sigma * samples.delta
    T_next = _transmittance(a) * np.exp(-a)
    # sum over later samples i > k of w_i g_w_i
    wg = weights * g_w
    later = np.cumsum(wg[:, ::-1], axis=1)[:, ::-1] - wg
    g_a = T_next * g_w - later
    return g_a * samples.delta, g_colors


def h_filter(x, tau: float):
    """Zero densities at or below the threshold: 0 if x <= tau else x."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(x <= tau, 0.0, x)


def estimate_depth(samples: RaySampleSet, tau: float) -> np.ndarray:
    """Thresholded expected depth D = sum_i W~_i (1 - exp(-h(sigma_i) delta_i)) t_i.

    W~ is the transmittance of the filtered densities. The result is a
    supervision signal only; no gradient is defined through it.

    Returns:
        np.ndarray: (R,) depths in the units of ``samples.t``.
    """
    w, _ = _weights(h_filter(samples.sigma, tau) * samples.delta)
    return np.sum(w * samples.t, axis=-1)


def composite(rgb: np.ndarray, opacity: np.ndarray, background) -> np.ndarray:
    """Blend unaccumulated opacity with the background color."""
    bg = np.asarray(background, dtype=np.float64)
    return rgb + (1.0 - opacity)[..., None] * bg


def composite_backward(g_out: np.ndarray, background) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of :func:`composite` with respect to ``rgb`` and ``opacity``."""
    bg = np.asarray(background, dtype=np.float64)
    return g_out, -(g_out @ bg)
