"""
Dense layers and activations with explicit backward passes.

Forward functions return the output plus whatever the backward pass needs
to remember; backward functions take the upstream gradient and that memory.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

Tensors = dict[str, np.ndarray]


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_grad(x: np.ndarray) -> np.ndarray:
    return (x > 0.0).astype(x.dtype)


def softplus(x: np.ndarray) -> np.ndarray:
    # log(1 + e^x) without overflow
    return np.logaddexp(0.0, x)


def softplus_grad(x: np.ndarray) -> np.ndarray:
    return sigmoid(x)


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


ACTIVATIONS = {
    "relu": (relu, relu_grad),
    "softplus": (softplus, softplus_grad),
}


def init_linear(rng: np.random.Generator, fan_in: int, fan_out: int, zero: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Uniform fan-in initialization U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for W and b."""
    if zero:
        return np.zeros((fan_in, fan_out)), np.zeros(fan_out)
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    W = rng.uniform(-bound, bound, size=(fan_in, fan_out))
    b = rng.uniform(-bound, bound, size=fan_out)
    return W, b


@dataclass
class MLPSpec:
    """Layer widths of a plain ReLU MLP with optional input re-injection.

    Attributes:
        prefix: Key prefix of the parameter tensors (``<prefix>.<i>.W``).
        widths: Input width followed by the output width of every layer.
        skips: Layers whose input is the previous activation concatenated
            with the network input.
        linear_last: Leave the last layer without activation.
    """

    prefix: str
    widths: Sequence[int]
    skips: Sequence[int] = ()
    linear_last: bool = True

    @property
    def n_layers(self) -> int:
        return len(self.widths) - 1

    def fan_in(self, layer: int) -> int:
        extra = self.widths[0] if layer in self.skips else 0
        return self.widths[layer] + extra

    def init(self, rng: np.random.Generator, tensors: Tensors, zero_last: bool = False) -> None:
        """Allocate and initialize this MLP's tensors in ``tensors``."""
        for i in range(self.n_layers):
            W, b = init_linear(
                rng, self.fan_in(i), self.widths[i + 1], zero=zero_last and i == self.n_layers - 1
            )
            tensors[f"{self.prefix}.{i}.W"] = W
            tensors[f"{self.prefix}.{i}.b"] = b


def mlp_forward(spec: MLPSpec, tensors: Tensors, x: np.ndarray) -> tuple[np.ndarray, list]:
    """Run the MLP on (N, widths[0]) inputs.

    Returns:
        tuple: Output (N, widths[-1]) and the memory for :func:`mlp_backward`.
    """
    memory = []
    h = x
    for i in range(spec.n_layers):
        inp = np.concatenate([h, x], axis=-1) if i in spec.skips else h
        z = inp @ tensors[f"{spec.prefix}.{i}.W"] + tensors[f"{spec.prefix}.{i}.b"]
        last = i == spec.n_layers - 1
        h = z if (last and spec.linear_last) else relu(z)
        memory.append((inp, z))
    return h, memory


def mlp_backward(
    spec: MLPSpec,
    tensors: Tensors,
    memory: list,
    grad_out: np.ndarray,
    grads: Tensors,
    need_input_grad: bool = True,
) -> Optional[np.ndarray]:
    """Backpropagate through :func:`mlp_forward`, accumulating into ``grads``.

    Returns:
        Optional[np.ndarray]: Gradient with respect to the network input.
    """
    in_width = spec.widths[0]
    g_h = grad_out
    g_x = np.zeros(grad_out.shape[:-1] + (in_width,)) if need_input_grad else None
    for i in reversed(range(spec.n_layers)):
        inp, z = memory[i]
        last = i == spec.n_layers - 1
        g_z = g_h if (last and spec.linear_last) else g_h * relu_grad(z)
        W = tensors[f"{spec.prefix}.{i}.W"]
        grads[f"{spec.prefix}.{i}.W"] += inp.T @ g_z
        grads[f"{spec.prefix}.{i}.b"] += g_z.sum(axis=0)
        if i == 0 and not need_input_grad and not spec.skips:
            break
        g_inp = g_z @ W.T
        if i in spec.skips:
            if g_x is not None:
                g_x += g_inp[..., -in_width:]
            g_inp = g_inp[..., :-in_width]
        if i == 0:
            if g_x is not None:
                g_x += g_inp
        else:
            g_h = g_inp
    return g_x
