"""
Frequency (positional) encoding.

gamma(p) = [p, sin(2^0 pi p), cos(2^0 pi p), ..., sin(2^(L-1) pi p), cos(2^(L-1) pi p)]

with the raw input first when ``include_input`` is set. Each sin/cos block
holds all components of ``p``.
"""

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ConfigError


@dataclass(frozen=True)
class EncodingConfig:
    """Octave counts for the three encoded inputs.

    Attributes:
        position_octaves: L_x for sample positions fed to the radiance MLP.
        direction_octaves: L_d for view directions.
        warp_octaves: Octaves for positions fed to the warping MLP.
        include_input: Append the raw input before the sin/cos blocks.
    """

    position_octaves: int = 10
    direction_octaves: int = 4
    warp_octaves: int = 6
    include_input: bool = True

    def __post_init__(self):
        for name in ("position_octaves", "direction_octaves", "warp_octaves"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")

    def position_dim(self) -> int:
        """Width of the encoded position."""
        return encoded_dim(3, self.position_octaves, self.include_input)

    def direction_dim(self) -> int:
        """Width of the encoded direction."""
        return encoded_dim(3, self.direction_octaves, self.include_input)

    def warp_dim(self) -> int:
        """Width of the encoded warp input position."""
        return encoded_dim(3, self.warp_octaves, self.include_input)

    def to_dict(self) -> dict:
        """Convert to a JSON-friendly dictionary."""
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "EncodingConfig":
        """Inverse of :meth:`to_dict`."""
        return cls(**data)


def encoded_dim(dim: int, octaves: int, include_input: bool = True) -> int:
    """Output width of :func:`positional_encode`."""
    return dim * 2 * octaves + (dim if include_input else 0)


def _frequencies(octaves: int) -> np.ndarray:
    return np.pi * 2.0 ** np.arange(octaves)


def positional_encode(p: np.ndarray, octaves: int, include_input: bool = True) -> np.ndarray:
    """Encode the last axis of ``p``.

    Args:
        p: (..., D) inputs, expected in [-1, 1].
        octaves: Number of frequency octaves L.
        include_input: Prepend the raw input.

    Returns:
        np.ndarray: (..., D * 2L [+ D]) features.
    """
    p = np.asarray(p, dtype=np.float64)
    parts = [p] if include_input else []
    for freq in _frequencies(octaves):
        parts.append(np.sin(freq * p))
        parts.append(np.cos(freq * p))
    if not parts:
        return np.zeros(p.shape[:-1] + (0,))
    return np.concatenate(parts, axis=-1)


def positional_encode_backward(
    p: np.ndarray, octaves: int, grad_features: np.ndarray, include_input: bool = True
) -> np.ndarray:
    """Gradient with respect to ``p`` given the gradient of the features.

    Args:
        p: (..., D) inputs used in the forward pass.
        octaves: Number of frequency octaves L.
        grad_features: (..., D * 2L [+ D]) upstream gradient.
        include_input: Whether the forward pass prepended the raw input.

    Returns:
        np.ndarray: (..., D) gradient.
    """
    p = np.asarray(p, dtype=np.float64)
    dim = p.shape[-1]
    grad = np.zeros_like(p)
    offset = 0
    if include_input:
        grad += grad_features[..., :dim]
        offset = dim
    for freq in _frequencies(octaves):
        g_sin = grad_features[..., offset : offset + dim]
        g_cos = grad_features[..., offset + dim : offset + 2 * dim]
        grad += freq * (np.cos(freq * p) * g_sin - np.sin(freq * p) * g_cos)
        offset += 2 * dim
    return grad
