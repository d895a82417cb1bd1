"""
Warped radiance field.

Sample positions are mapped into the unit cube of the bounding box. For a
sample seen through mirror m the warping MLP predicts an offset

    du = Psi(gamma_w(u), omega_m)

and the radiance MLP is queried at u + du with the unwarped view direction.
Samples of the anchor mirror skip Psi entirely. Offsets reported in world
units are du scaled by the box half extent.
"""

import logging
import threading
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np

from ..errors import ConfigError, DataError, NonFiniteError
from ..raybank import BBox
from .encoding import EncodingConfig, positional_encode, positional_encode_backward
from .layers import ACTIVATIONS, MLPSpec, Tensors, init_linear, mlp_backward, mlp_forward, sigmoid

logger = logging.getLogger(__name__)

NETWORKS = ("coarse", "fine")

_counter_lock = threading.Lock()
_evaluation_counts = {"warp": 0, "radiance": 0}


def _count(kind: str, n: int) -> None:
    with _counter_lock:
        _evaluation_counts[kind] += n


def evaluation_counts() -> dict[str, int]:
    """Number of points pushed through the warping and radiance MLPs so far."""
    with _counter_lock:
        return dict(_evaluation_counts)


@dataclass(frozen=True)
class FieldConfig:
    """Network shapes and options of the radiance and warping MLPs.

    Attributes:
        trunk_width: Hidden width of the radiance trunk.
        trunk_depth: Number of trunk layers.
        trunk_skips: Trunk layers that re-read the encoded position.
        color_width: Hidden width of the view-dependent color head.
        warp_width: Hidden width of the warping MLP.
        warp_depth: Number of warping layers (the last one is linear).
        latent_dim: Size of each per-mirror latent code.
        latent_init_std: Standard deviation of the latent initialization.
        encoding: Frequency encoding octaves.
        density_activation: ``"softplus"`` or ``"relu"``.
        separate_fine_network: Allocate a second radiance MLP for the fine pass.
    """

    trunk_width: int = 256
    trunk_depth: int = 8
    trunk_skips: tuple[int, ...] = (5,)
    color_width: int = 128
    warp_width: int = 128
    warp_depth: int = 5
    latent_dim: int = 16
    latent_init_std: float = 0.01
    encoding: EncodingConfig = field(default_factory=EncodingConfig)
    density_activation: str = "softplus"
    separate_fine_network: bool = False

    def __post_init__(self):
        for name in ("trunk_width", "trunk_depth", "color_width", "warp_width", "warp_depth"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.latent_dim < 0 or self.latent_init_std < 0:
            raise ConfigError("latent_dim and latent_init_std must be non-negative")
        if any(s <= 0 or s >= self.trunk_depth for s in self.trunk_skips):
            raise ConfigError(f"trunk skips {self.trunk_skips} must lie in [1, {self.trunk_depth})")
        if self.density_activation not in ACTIVATIONS:
            raise ConfigError(
                f"density_activation must be one of {sorted(ACTIVATIONS)}, got {self.density_activation!r}"
            )
        object.__setattr__(self, "trunk_skips", tuple(int(s) for s in self.trunk_skips))

    @classmethod
    def large(cls) -> "FieldConfig":
        """Full-size networks: 8x256 radiance trunk, 5x128 warp, 16-dim codes."""
        return cls()

    @classmethod
    def desk(cls) -> "FieldConfig":
        """Half-width networks for CPU-sized runs."""
        return cls(trunk_width=128, color_width=64, warp_width=64)

    @classmethod
    def toy(cls) -> "FieldConfig":
        """Small networks for tests and smoke runs."""
        return cls(
            trunk_width=32,
            trunk_depth=4,
            trunk_skips=(2,),
            color_width=16,
            warp_width=16,
            warp_depth=3,
            latent_dim=4,
            encoding=EncodingConfig(position_octaves=4, direction_octaves=2, warp_octaves=2),
        )

    @classmethod
    def preset(cls, name: str) -> "FieldConfig":
        """Look up ``large``, ``desk`` or ``toy``."""
        presets = {"large": cls.large, "desk": cls.desk, "toy": cls.toy}
        if name not in presets:
            raise ConfigError(f"unknown network preset {name!r}; choose one of {sorted(presets)}")
        return presets[name]()

    def trunk_spec(self, prefix: str) -> MLPSpec:
        widths = [self.encoding.position_dim()] + [self.trunk_width] * self.trunk_depth
        return MLPSpec(f"{prefix}.trunk", widths, skips=self.trunk_skips, linear_last=False)

    def head_spec(self, prefix: str) -> MLPSpec:
        widths = [self.trunk_width + self.encoding.direction_dim(), self.color_width, 3]
        return MLPSpec(f"{prefix}.head", widths, linear_last=True)

    def warp_spec(self) -> MLPSpec:
        widths = [self.encoding.warp_dim() + self.latent_dim] + [self.warp_width] * (self.warp_depth - 1) + [3]
        return MLPSpec("warp", widths, linear_last=True)

    def to_dict(self) -> dict:
        """Convert to a JSON-friendly dictionary."""
        data = asdict(self)
        data["trunk_skips"] = list(self.trunk_skips)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "FieldConfig":
        """Inverse of :meth:`to_dict`; unknown keys raise ConfigError."""
        data = dict(data)
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown field config keys: {sorted(unknown)}")
        if "encoding" in data and isinstance(data["encoding"], dict):
            try:
                data["encoding"] = EncodingConfig.from_dict(data["encoding"])
            except TypeError as e:
                raise ConfigError(f"invalid encoding config: {e}") from e
        if "trunk_skips" in data:
            data["trunk_skips"] = tuple(data["trunk_skips"])
        return cls(**data)


@dataclass
class FieldParams:
    """All learnable state plus what is needed to interpret it.

    ``tensors`` maps names to arrays: ``F.*`` (radiance MLP), ``F_fine.*``
    (second radiance MLP, only in two-network mode), ``warp.*`` (warping MLP)
    and ``latent`` (one row per mirror).
    """

    config: FieldConfig
    tensors: Tensors
    n_mirrors: int
    anchor_index: int
    bbox: BBox

    @classmethod
    def initialize(
        cls, config: FieldConfig, n_mirrors: int, anchor_index: int, bbox: BBox, seed: int = 0
    ) -> "FieldParams":
        """Fresh parameters.

        Weights use uniform fan-in initialization, the last warping layer is
        zero so the initial warp is the identity, and latent codes are
        Gaussian with ``config.latent_init_std``.

        Raises:
            ConfigError: If the anchor index is not a valid mirror.
        """
        if n_mirrors < 1 or not 0 <= anchor_index < n_mirrors:
            raise ConfigError(f"anchor index {anchor_index} invalid for {n_mirrors} mirrors")
        rng = np.random.default_rng(seed)
        tensors: Tensors = {}
        prefixes = ["F", "F_fine"] if config.separate_fine_network else ["F"]
        for prefix in prefixes:
            config.trunk_spec(prefix).init(rng, tensors)
            W, b = init_linear(rng, config.trunk_width, 1)
            tensors[f"{prefix}.sigma.W"], tensors[f"{prefix}.sigma.b"] = W, b
            W, b = init_linear(rng, config.trunk_width, config.trunk_width)
            tensors[f"{prefix}.feature.W"], tensors[f"{prefix}.feature.b"] = W, b
            config.head_spec(prefix).init(rng, tensors)
        config.warp_spec().init(rng, tensors, zero_last=True)
        tensors["latent"] = rng.normal(0.0, config.latent_init_std, size=(n_mirrors, config.latent_dim))
        params = cls(config=config, tensors=tensors, n_mirrors=n_mirrors, anchor_index=anchor_index, bbox=bbox)
        logger.debug("initialized field with %d parameters", params.n_parameters)
        return params

    @property
    def n_parameters(self) -> int:
        """Total number of scalars."""
        return int(sum(t.size for t in self.tensors.values()))

    def radiance_prefix(self, network: str) -> str:
        """Tensor prefix of the radiance MLP serving ``network``."""
        if network not in NETWORKS:
            raise ConfigError(f"unknown network {network!r}")
        return "F_fine" if network == "fine" and self.config.separate_fine_network else "F"

    def zeros_like(self) -> Tensors:
        """Zero gradient buffers keyed like :attr:`tensors`."""
        return {k: np.zeros_like(v) for k, v in self.tensors.items()}

    def copy(self) -> "FieldParams":
        """Deep copy of the tensors."""
        return replace(self, tensors={k: v.copy() for k, v in self.tensors.items()})

    def check_mirror_index(self, mirror_index) -> np.ndarray:
        """Validate mirror indices against the latent table.

        Raises:
            DataError: On indices outside ``[0, n_mirrors)``.
        """
        idx = np.asarray(mirror_index, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= self.n_mirrors):
            raise DataError(f"unknown mirror index in {np.unique(idx).tolist()} (field has {self.n_mirrors})")
        return idx


def param_group(key: str) -> str:
    """Parameter group of a tensor name: ``F``, ``warp`` or ``latent``."""
    if key == "latent":
        return "latent"
    if key.startswith("warp."):
        return "warp"
    return "F"


@dataclass
class SampleBatch:
    """Points to query, with the ray direction and mirror of each point.

    Attributes:
        points: (N, 3) positions in world millimeters.
        directions: (N, 3) unit view directions.
        mirror_index: (N,) mirror that observed each point.
        warp: Apply the warping field to non-anchor samples.
        network: ``"coarse"`` or ``"fine"``.
    """

    points: np.ndarray
    directions: np.ndarray
    mirror_index: np.ndarray
    warp: bool = True
    network: str = "coarse"


@dataclass
class _QueryMemory:
    prefix: str
    u_warped: np.ndarray
    enc_d: np.ndarray
    trunk_memory: list
    trunk_out: np.ndarray
    sigma_pre: np.ndarray
    head_memory: list
    rgb: np.ndarray
    warp_rows: Optional[np.ndarray] = None
    warp_inputs: Optional[np.ndarray] = None
    warp_memory: Optional[list] = None
    warp_mirrors: Optional[np.ndarray] = None


def _warp_forward(params: FieldParams, u: np.ndarray, mirrors: np.ndarray) -> tuple[np.ndarray, list]:
    cfg = params.config
    enc = positional_encode(u, cfg.encoding.warp_octaves, cfg.encoding.include_input)
    inp = np.concatenate([enc, params.tensors["latent"][mirrors]], axis=-1)
    _count("warp", u.shape[0])
    return mlp_forward(cfg.warp_spec(), params.tensors, inp)


def _warp_backward(
    params: FieldParams,
    u: np.ndarray,
    mirrors: np.ndarray,
    memory: list,
    grad_out: np.ndarray,
    grads: Tensors,
    need_position_grad: bool = False,
) -> Optional[np.ndarray]:
    cfg = params.config
    g_in = mlp_backward(cfg.warp_spec(), params.tensors, memory, grad_out, grads)
    enc_dim = cfg.encoding.warp_dim()
    np.add.at(grads["latent"], mirrors, g_in[:, enc_dim:])
    if not need_position_grad:
        return None
    return positional_encode_backward(u, cfg.encoding.warp_octaves, g_in[:, :enc_dim], cfg.encoding.include_input)


def _radiance_forward(
    params: FieldParams, prefix: str, u_warped: np.ndarray, directions: np.ndarray
) -> tuple[np.ndarray, np.ndarray, _QueryMemory]:
    cfg = params.config
    T = params.tensors
    enc_x = positional_encode(u_warped, cfg.encoding.position_octaves, cfg.encoding.include_input)
    enc_d = positional_encode(directions, cfg.encoding.direction_octaves, cfg.encoding.include_input)
    h, trunk_memory = mlp_forward(cfg.trunk_spec(prefix), T, enc_x)
    sigma_pre = h @ T[f"{prefix}.sigma.W"] + T[f"{prefix}.sigma.b"]
    activation, _ = ACTIVATIONS[cfg.density_activation]
    sigma = activation(sigma_pre)[:, 0]
    feature = h @ T[f"{prefix}.feature.W"] + T[f"{prefix}.feature.b"]
    logits, head_memory = mlp_forward(cfg.head_spec(prefix), T, np.concatenate([feature, enc_d], axis=-1))
    rgb = sigmoid(logits)
    _count("radiance", u_warped.shape[0])
    memory = _QueryMemory(
        prefix=prefix,
        u_warped=u_warped,
        enc_d=enc_d,
        trunk_memory=trunk_memory,
        trunk_out=h,
        sigma_pre=sigma_pre,
        head_memory=head_memory,
        rgb=rgb,
    )
    return rgb, sigma, memory


def _radiance_backward(
    params: FieldParams,
    memory: _QueryMemory,
    g_rgb: np.ndarray,
    g_sigma: np.ndarray,
    grads: Tensors,
    need_position_grad: bool,
) -> Optional[np.ndarray]:
    cfg = params.config
    T = params.tensors
    prefix = memory.prefix
    h = memory.trunk_out

    g_logits = g_rgb * memory.rgb * (1.0 - memory.rgb)
    g_head_in = mlp_backward(cfg.head_spec(prefix), T, memory.head_memory, g_logits, grads)
    g_feature = g_head_in[:, : cfg.trunk_width]
    grads[f"{prefix}.feature.W"] += h.T @ g_feature
    grads[f"{prefix}.feature.b"] += g_feature.sum(axis=0)
    g_h = g_feature @ T[f"{prefix}.feature.W"].T

    _, activation_grad = ACTIVATIONS[cfg.density_activation]
    g_sigma_pre = g_sigma[:, None] * activation_grad(memory.sigma_pre)
    grads[f"{prefix}.sigma.W"] += h.T @ g_sigma_pre
    grads[f"{prefix}.sigma.b"] += g_sigma_pre.sum(axis=0)
    g_h += g_sigma_pre @ T[f"{prefix}.sigma.W"].T

    g_enc = mlp_backward(
        cfg.trunk_spec(prefix), T, memory.trunk_memory, g_h, grads, need_input_grad=need_position_grad
    )
    if not need_position_grad:
        return None
    return positional_encode_backward(
        memory.u_warped, cfg.encoding.position_octaves, g_enc, cfg.encoding.include_input
    )


def query_field(params: FieldParams, batch: SampleBatch) -> tuple[np.ndarray, np.ndarray, _QueryMemory]:
    """Evaluate colors and densities of a sample batch.

    Returns:
        tuple: ``(rgb (N, 3), sigma (N,), memory)``.
    """
    prefix = params.radiance_prefix(batch.network)
    points = np.asarray(batch.points, dtype=np.float64).reshape(-1, 3)
    directions = np.asarray(batch.directions, dtype=np.float64).reshape(-1, 3)
    mirrors = params.check_mirror_index(batch.mirror_index).reshape(-1)
    u = params.bbox.to_unit(points)

    warp_rows = warp_memory = warp_mirrors = warp_inputs = None
    u_warped = u
    if batch.warp:
        warp_rows = np.flatnonzero(mirrors != params.anchor_index)
        if warp_rows.size:
            warp_mirrors = mirrors[warp_rows]
            warp_inputs = u[warp_rows]
            du, warp_memory = _warp_forward(params, warp_inputs, warp_mirrors)
            u_warped = u.copy()
            u_warped[warp_rows] += du
        else:
            warp_rows = None

    rgb, sigma, memory = _radiance_forward(params, prefix, u_warped, directions)
    memory.warp_rows = warp_rows
    memory.warp_memory = warp_memory
    memory.warp_mirrors = warp_mirrors
    memory.warp_inputs = warp_inputs
    return rgb, sigma, memory


def query_field_backward(
    params: FieldParams,
    memory: _QueryMemory,
    g_rgb: Optional[np.ndarray],
    g_sigma: Optional[np.ndarray],
    grads: Tensors,
) -> None:
    """Accumulate parameter gradients of one :func:`query_field` call."""
    n = memory.rgb.shape[0]
    g_rgb = np.zeros((n, 3)) if g_rgb is None else np.asarray(g_rgb, dtype=np.float64).reshape(n, 3)
    g_sigma = np.zeros(n) if g_sigma is None else np.asarray(g_sigma, dtype=np.float64).reshape(n)
    warped = memory.warp_rows is not None
    g_u = _radiance_backward(params, memory, g_rgb, g_sigma, grads, need_position_grad=warped)
    if warped:
        rows = memory.warp_rows
        _warp_backward(params, memory.warp_inputs, memory.warp_mirrors, memory.warp_memory, g_u[rows], grads)


class FieldTape:
    """Records field queries so a loss closure can be differentiated.

    A closure calls :meth:`query` any number of times; :meth:`backward` then
    takes one ``(g_rgb, g_sigma)`` pair per recorded query, in order.
    """

    def __init__(self, params: FieldParams):
        """Initialize an empty tape over ``params``."""
        self.params = params
        self.records: list[_QueryMemory] = []

    def query(self, batch: SampleBatch) -> tuple[np.ndarray, np.ndarray]:
        """Evaluate and record a batch."""
        rgb, sigma, memory = query_field(self.params, batch)
        self.records.append(memory)
        return rgb, sigma

    def backward(self, output_grads: Sequence[tuple[Optional[np.ndarray], Optional[np.ndarray]]]) -> Tensors:
        """Parameter gradients given the output gradient of every query."""
        if len(output_grads) != len(self.records):
            raise ValueError(f"expected {len(self.records)} gradient pairs, got {len(output_grads)}")
        grads = self.params.zeros_like()
        for memory, (g_rgb, g_sigma) in zip(self.records, output_grads):
            query_field_backward(self.params, memory, g_rgb, g_sigma, grads)
        return grads


LossClosure = Callable[[FieldTape], tuple[float, Sequence[tuple[Optional[np.ndarray], Optional[np.ndarray]]]]]


def check_finite(grads: Tensors) -> None:
    """Raise NonFiniteError naming the first tensor holding NaN or inf."""
    for key, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(key, f"{int(np.count_nonzero(~np.isfinite(g)))} bad entries")


def forward_backward(params: FieldParams, loss_fn: LossClosure) -> tuple[float, Tensors]:
    """Loss value and exact gradients of a closure over field queries.

    Args:
        params: Field parameters; never modified.
        loss_fn: Callable receiving a :class:`FieldTape`; it queries the field
            through the tape and returns the scalar loss together with the
            gradient of the loss with respect to each query's (rgb, sigma).

    Returns:
        tuple: ``(loss, grads)`` with one gradient array per tensor.

    Raises:
        NonFiniteError: If the loss or any gradient is not finite.
    """
    tape = FieldTape(params)
    loss, output_grads = loss_fn(tape)
    if not np.isfinite(loss):
        raise NonFiniteError("loss", f"value {loss}")
    grads = tape.backward(output_grads)
    check_finite(grads)
    return float(loss), grads


def eval_warp(params: FieldParams, x, mirror_index: Union[int, np.ndarray]) -> np.ndarray:
    """World-space warp offset for points seen through a mirror.

    Args:
        params: Field parameters.
        x: (3,) or (N, 3) positions (mm).
        mirror_index: Mirror index (scalar or (N,)).

    Returns:
        np.ndarray: Offsets shaped like ``x``; exactly zero for the anchor.

    Raises:
        DataError: On unknown mirror indices.
    """
    x = np.asarray(x, dtype=np.float64)
    points = x.reshape(-1, 3)
    mirrors = np.broadcast_to(params.check_mirror_index(mirror_index), points.shape[:1])
    offsets = np.zeros_like(points)
    rows = np.flatnonzero(mirrors != params.anchor_index)
    if rows.size:
        du, _ = _warp_forward(params, params.bbox.to_unit(points[rows]), mirrors[rows])
        offsets[rows] = du * params.bbox.half_extent
    return offsets.reshape(x.shape)


def warp_jacobian(params: FieldParams, x, mirror_index: int) -> tuple[np.ndarray, np.ndarray]:
    """Jacobians of :func:`eval_warp` at one point.

    Returns:
        tuple: ``(d offset / d x (3, 3), d offset / d omega_m (3, latent_dim))``.
    """
    m = int(params.check_mirror_index(mirror_index))
    latent_dim = params.config.latent_dim
    if m == params.anchor_index:
        return np.zeros((3, 3)), np.zeros((3, latent_dim))
    half = params.bbox.half_extent
    u = params.bbox.to_unit(np.asarray(x, dtype=np.float64).reshape(1, 3))
    mirrors = np.array([m])
    _, memory = _warp_forward(params, u, mirrors)
    J_u = np.zeros((3, 3))
    J_w = np.zeros((3, latent_dim))
    for k in range(3):
        grads = params.zeros_like()
        g_out = np.zeros((1, 3))
        g_out[0, k] = 1.0
        g_u = _warp_backward(params, u, mirrors, memory, g_out, grads, need_position_grad=True)
        J_u[k] = g_u[0]
        J_w[k] = grads["latent"][m]
    return half[:, None] * J_u / half[None, :], half[:, None] * J_w


def eval_radiance(params: FieldParams, x_warped, d, network: str = "coarse") -> tuple[np.ndarray, np.ndarray]:
    """Color and density at already warped positions.

    Args:
        params: Field parameters.
        x_warped: (3,) or (N, 3) positions in world millimeters.
        d: Unit view directions matching ``x_warped``.
        network: ``"coarse"`` or ``"fine"``.

    Returns:
        tuple: ``(rgb, sigma)`` with rgb in [0, 1] and sigma >= 0.
    """
    x = np.asarray(x_warped, dtype=np.float64)
    points = x.reshape(-1, 3)
    dirs = np.broadcast_to(np.asarray(d, dtype=np.float64).reshape(-1, 3), points.shape)
    rgb, sigma, _ = _radiance_forward(params, params.radiance_prefix(network), params.bbox.to_unit(points), dirs)
    if x.ndim == 1:
        return rgb[0], sigma[0]
    return rgb, sigma
