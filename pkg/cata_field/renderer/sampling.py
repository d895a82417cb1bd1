"""
Stratified and hierarchical (inverse-CDF) sampling along rays.

Sample i of a ray stands for the interval [t_i, t_{i+1}), the last one for
[t_N, t_far]; these intervals are the bins of the piecewise-constant PDF
used for fine sampling.
"""

from typing import Optional

import numpy as np

from ..errors import ConfigError


def sample_coarse(
    interval: tuple[np.ndarray, np.ndarray],
    n: int,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """One sample per stratum of the n-partition of [t_near, t_far].

    Args:
        interval: ``(t_near, t_far)`` scalars or (R,) arrays.
        n: Number of samples (>= 1).
        rng: Generator for uniform jitter; None places samples at stratum
            midpoints.

    Returns:
        np.ndarray: (R, n) sorted sample parameters ((1, n) for scalars).
    """
    if n < 1:
        raise ConfigError(f"need at least one coarse sample, got {n}")
    t_near = np.atleast_1d(np.asarray(interval[0], dtype=np.float64))
    t_far = np.atleast_1d(np.asarray(interval[1], dtype=np.float64))
    width = (t_far - t_near) / n
    if rng is None:
        jitter = np.full((t_near.shape[0], n), 0.5)
    else:
        jitter = rng.random((t_near.shape[0], n))
    return t_near[:, None] + (np.arange(n)[None, :] + jitter) * width[:, None]


def bin_edges(t: np.ndarray, t_far: np.ndarray) -> np.ndarray:
    """(R, S + 1) bin edges [t_1, ..., t_S, t_far]."""
    t = np.atleast_2d(t)
    return np.concatenate([t, np.atleast_1d(t_far).reshape(-1, 1)], axis=1)


def inverse_cdf(edges: np.ndarray, weights: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Map uniforms through the inverse CDF of a piecewise-constant PDF.

    Args:
        edges: (R, S + 1) bin edges.
        weights: (R, S) nonnegative bin masses; all-zero rows become uniform
            in t (masses proportional to bin widths).
        u: (R, n) uniforms in [0, 1).

    Returns:
        np.ndarray: (R, n) samples.
    """
    weights = np.asarray(weights, dtype=np.float64)
    widths = np.diff(edges, axis=1)
    total = weights.sum(axis=1, keepdims=True)
    masses = np.where(total > 0, weights, widths)
    pdf = masses / masses.sum(axis=1, keepdims=True)
    cdf = np.concatenate([np.zeros((pdf.shape[0], 1)), np.cumsum(pdf, axis=1)], axis=1)
    # bin k holds u when cdf[k] <= u < cdf[k + 1]
    idx = np.sum(cdf[:, None, 1:-1] <= u[:, :, None], axis=-1)
    rows = np.arange(edges.shape[0])[:, None]
    p = pdf[rows, idx]
    frac = np.where(p > 0, (u - cdf[rows, idx]) / np.where(p > 0, p, 1.0), 0.5)
    frac = np.clip(frac, 0.0, 1.0)
    return edges[rows, idx] + frac * widths[rows, idx]


def sample_fine(
    t: np.ndarray,
    weights: np.ndarray,
    n_fine: int,
    t_far: np.ndarray,
    rng: Optional[np.random.Generator] = None,
    merge: bool = True,
) -> np.ndarray:
    """Importance samples from coarse weights, merged with the coarse samples.

    Args:
        t: (R, S) coarse samples.
        weights: (R, S) nonnegative coarse weights.
        n_fine: Number of additional samples per ray.
        t_far: (R,) far bounds (right edge of the last bin).
        rng: Generator for the uniforms (``rng.random((R, n_fine))``); None
            uses the deterministic quantiles (k + 0.5) / n_fine.
        merge: Return the sorted union with ``t`` instead of the new samples.

    Returns:
        np.ndarray: (R, S + n_fine) sorted samples, or (R, n_fine) when
            ``merge`` is False. Coincident samples are possible and carry a
            zero-length interval.
    """
    t = np.atleast_2d(np.asarray(t, dtype=np.float64))
    weights = np.atleast_2d(weights)
    if np.any(weights < 0):
        raise ValueError("coarse weights must be nonnegative")
    n_rays = t.shape[0]
    if n_fine <= 0:
        return t.copy() if merge else np.zeros((n_rays, 0))
    if rng is None:
        u = np.broadcast_to((np.arange(n_fine) + 0.5) / n_fine, (n_rays, n_fine))
    else:
        u = rng.random((n_rays, n_fine))
    fine = inverse_cdf(bin_edges(t, t_far), weights, u)
    if not merge:
        return fine
    return np.sort(np.concatenate([t, fine], axis=1), axis=1)
