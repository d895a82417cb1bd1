"""
Adam optimizer over named tensors, plus the density-threshold schedule.
"""

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from ..errors import DataError
from ..neuralfield import check_finite

Tensors = dict[str, np.ndarray]


def tau_schedule(epoch: float, tau_max: float = 20.0, warmup: int = 3, ramp: int = 5) -> float:
    """Density threshold of the depth estimate at a (fractional) epoch.

    Zero through warm-up, then linear from 0 to ``tau_max`` over ``ramp``
    epochs, constant afterwards.
    """
    if epoch < warmup:
        return 0.0
    if ramp <= 0:
        return float(tau_max)
    return float(tau_max * min(1.0, (epoch - warmup) / ramp))


@dataclass
class AdamState:
    """First and second moments and step count of every tensor."""

    m: Tensors = field(default_factory=dict)
    v: Tensors = field(default_factory=dict)
    steps: dict[str, int] = field(default_factory=dict)

    @classmethod
    def zeros(cls, tensors: Tensors) -> "AdamState":
        """Fresh state for a parameter set."""
        return cls(
            m={k: np.zeros_like(t) for k, t in tensors.items()},
            v={k: np.zeros_like(t) for k, t in tensors.items()},
            steps={k: 0 for k in tensors},
        )

    def to_arrays(self) -> dict[str, np.ndarray]:
        """Flatten into named arrays for a checkpoint."""
        arrays = {}
        for k in self.m:
            arrays[f"m/{k}"] = self.m[k]
            arrays[f"v/{k}"] = self.v[k]
            arrays[f"steps/{k}"] = np.array(self.steps[k], dtype=np.int64)
        return arrays

    @classmethod
    def from_arrays(cls, arrays: dict[str, np.ndarray]) -> "AdamState":
        """Inverse of :meth:`to_arrays`."""
        state = cls()
        for name, value in arrays.items():
            kind, _, key = name.partition("/")
            if kind == "m":
                state.m[key] = np.array(value)
            elif kind == "v":
                state.v[key] = np.array(value)
            elif kind == "steps":
                state.steps[key] = int(value)
            else:
                raise DataError(f"unknown optimizer array {name!r}")
        if set(state.m) != set(state.v) or set(state.m) != set(state.steps):
            raise DataError("incomplete optimizer state")
        return state


def adam_step(
    tensors: Tensors,
    grads: Tensors,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    frozen: Iterable[str] = (),
) -> tuple[Tensors, AdamState]:
    """One bias-corrected Adam update, in place.

    Frozen tensors keep their values and moments. Each tensor counts its own
    steps, so a group unfrozen late starts with a fresh bias correction.
    Gradients are validated before any tensor or moment changes.

    Raises:
        NonFiniteError: If a gradient holds NaN or inf.
        DataError: If a gradient does not match its tensor.
    """
    check_finite(grads)
    frozen = set(frozen)
    for key, g in grads.items():
        if key not in frozen and (key not in tensors or tensors[key].shape != g.shape):
            raise DataError(f"gradient {key} does not match the parameters")
    for key, g in grads.items():
        if key in frozen:
            continue
        steps = state.steps.get(key, 0) + 1
        m = state.m.setdefault(key, np.zeros_like(g))
        v = state.v.setdefault(key, np.zeros_like(g))
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        state.steps[key] = steps
        m_hat = m / (1.0 - beta1**steps)
        v_hat = v / (1.0 - beta2**steps)
        tensors[key] -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return tensors, state
