"""
Training loop: shuffled ray batches, warm-up phasing, Adam, loss log and
per-epoch checkpoints.
"""

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
from tqdm import tqdm

from ..errors import ConfigError, DataError, TrainingDivergedError
from ..neuralfield import FieldConfig, FieldParams, forward_backward, param_group
from ..raybank import RayBank
from ..renderer import RenderConfig
from ..simulator import MirrorArrayTemplate
from ..storage import Checkpoint, CsvLog, save_checkpoint
from .losses import LossBreakdown
from .objective import BatchObjective, RayBatch
from .optim import AdamState, adam_step, tau_schedule

logger = logging.getLogger(__name__)

VARIANTS = ("full", "no-warp", "no-reg")
LOSS_LOG_COLUMNS = ("epoch", "step", "L_c", "L_v", "L_g", "L_total", "tau")


@dataclass
class TrainConfig:
    """Optimization settings.

    Attributes:
        lam: Weight of the visual-hull and geometry losses.
        learning_rate: Adam step size.
        batch_size: Rays per step.
        n_coarse: Stratified samples per ray.
        n_fine: Importance samples per ray.
        warmup_epochs: Epochs training only the radiance field.
        tau_max: Final density threshold of the depth estimate.
        tau_ramp_epochs: Epochs over which the threshold ramps up.
        epochs: Total epochs (full passes over the ray bank).
        seed: Seed of initialization, shuffling and jitter.
        void_samples: Void points per foreground ray and step.
        preset: Field size preset (large, desk, toy).
        variant: ``full``, ``no-warp`` (warp disabled for the whole run) or
            ``no-reg`` (lambda forced to 0).
        background: Background composited behind the field.
        divergence_factor: Abort when an epoch's mean L_c exceeds this
            multiple of the first-epoch mean.
        beta1: Adam first-moment decay.
        beta2: Adam second-moment decay.
        eps: Adam denominator offset.
    """

    lam: float = 1e-2
    learning_rate: float = 1e-4
    batch_size: int = 1024
    n_coarse: int = 64
    n_fine: int = 32
    warmup_epochs: int = 3
    tau_max: float = 20.0
    tau_ramp_epochs: int = 5
    epochs: int = 10
    seed: int = 0
    void_samples: int = 1
    preset: str = "desk"
    variant: str = "full"
    background: object = "green"
    divergence_factor: float = 10.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.lam < 0:
            raise ConfigError(f"lam must be >= 0, got {self.lam}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate < 0 or self.epochs < 0 or self.warmup_epochs < 0 or self.tau_ramp_epochs < 0:
            raise ConfigError("learning_rate, epochs and schedule lengths must be nonnegative")
        if self.void_samples < 0:
            raise ConfigError(f"void_samples must be >= 0, got {self.void_samples}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; choose one of {list(VARIANTS)}")
        if self.divergence_factor <= 1:
            raise ConfigError("divergence_factor must exceed 1")
        FieldConfig.preset(self.preset)
        self.render_config()

    @property
    def effective_lambda(self) -> float:
        """Regularizer weight after applying the variant."""
        return 0.0 if self.variant == "no-reg" else self.lam

    @property
    def use_warp(self) -> bool:
        """Whether the warping field is trained at all."""
        return self.variant != "no-warp"

    def tau(self, epoch: float) -> float:
        """Density threshold at an epoch."""
        return tau_schedule(epoch, self.tau_max, self.warmup_epochs, self.tau_ramp_epochs)

    def render_config(self, **overrides) -> RenderConfig:
        """Render settings of training (and matching inference)."""
        values = {"n_coarse": self.n_coarse, "n_fine": self.n_fine, "background": self.background}
        values.update(overrides)
        return RenderConfig(**values)

    def field_config(self) -> FieldConfig:
        """Field architecture of the preset."""
        return FieldConfig.preset(self.preset)

    @classmethod
    def large(cls) -> "TrainConfig":
        """4000-ray batches, 96 + 32 samples, full-size networks."""
        return cls(batch_size=4000, n_coarse=96, n_fine=32, preset="large", epochs=30)

    @classmethod
    def desk(cls) -> "TrainConfig":
        """CPU-sized default."""
        return cls(learning_rate=5e-4)

    @classmethod
    def toy(cls) -> "TrainConfig":
        """Small networks and batches for tests."""
        return cls(learning_rate=5e-3, batch_size=256, n_coarse=16, n_fine=8, preset="toy", epochs=4)

    def to_dict(self) -> dict:
        """Convert to a JSON-friendly dictionary."""
        data = asdict(self)
        if not isinstance(self.background, str):
            data["background"] = list(self.background)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        """Build from a dictionary; unknown keys raise ConfigError."""
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown train config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigError(f"invalid train config: {e}") from e


@dataclass
class TrainResult:
    """Outcome of a training run."""

    params: FieldParams
    history: list[LossBreakdown] = field(default_factory=list)
    epoch_means: list[dict] = field(default_factory=list)
    checkpoint: Optional[Path] = None


def epoch_batches(bank: RayBank, batch_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Split one shuffled pass over the bank into batches.

    Foreground and background rays are shuffled separately and dealt out
    evenly, so every batch holds them in proportion to the bank.
    """
    n = len(bank)
    if n == 0:
        return []
    n_batches = -(-n // batch_size)
    fg = rng.permutation(np.flatnonzero(bank.foreground))
    bg = rng.permutation(np.flatnonzero(~bank.foreground))
    fg_parts = np.array_split(fg, n_batches)
    bg_parts = np.array_split(bg, n_batches)
    return [np.concatenate([a, b]) for a, b in zip(fg_parts, bg_parts)]


class Trainer:
    """Fits a warped radiance field to a ray bank.

    Usage:
        trainer = Trainer(TrainConfig.desk(), output_dir="runs/desk")
        result = trainer.train(bank, template)
    """

    def __init__(
        self,
        config: Optional[TrainConfig] = None,
        field_config: Optional[FieldConfig] = None,
        output_dir: Optional[Union[str, Path]] = None,
        progress: bool = False,
    ):
        """Initialize the trainer.

        Args:
            config: Optimization settings (desk defaults when None).
            field_config: Architecture; None uses ``config.preset``.
            output_dir: Directory for the loss log and checkpoints; None
                keeps everything in memory.
            progress: Show a progress bar per epoch.
        """
        self.config = config or TrainConfig.desk()
        self.field_config = field_config or self.config.field_config()
        self.output_dir = Path(output_dir) if output_dir is not None else None
        self.progress = progress

    def frozen_keys(self, params: FieldParams, epoch: int) -> list[str]:
        """Tensors excluded from the update in an epoch."""
        if self.config.use_warp and epoch >= self.config.warmup_epochs:
            return []
        return [k for k in params.tensors if param_group(k) in ("warp", "latent")]

    def train(
        self,
        bank: RayBank,
        template: MirrorArrayTemplate,
        resume: Optional[Checkpoint] = None,
    ) -> TrainResult:
        """Run all epochs.

        Args:
            bank: Training rays.
            template: Mirror template the rays were restored with; sets the
                latent table size and the anchor.
            resume: Checkpoint to continue from (parameters, optimizer state
                and epoch).

        Returns:
            TrainResult: Final parameters, per-step losses and epoch means.

        Raises:
            DataError: If the bank does not fit the template or is empty.
            TrainingDivergedError: If the divergence guard fires.
            NonFiniteError: If a loss or gradient becomes non-finite.
        """
        cfg = self.config
        if len(bank) == 0:
            raise DataError("ray bank is empty")
        if bank.n_mirrors > template.count:
            raise DataError(f"ray bank references {bank.n_mirrors} mirrors, template has {template.count}")

        rng = np.random.default_rng(cfg.seed)
        start_epoch = 0
        step = 0
        reference = None
        if resume is not None:
            params = resume.params.copy()
            if params.n_mirrors != template.count or params.anchor_index != template.anchor_index:
                raise DataError("checkpoint was trained for a different mirror template")
            state = AdamState.from_arrays(resume.optimizer) if resume.optimizer else AdamState.zeros(params.tensors)
            start_epoch = int(resume.metadata.get("epoch", -1)) + 1
            step = int(resume.metadata.get("step", 0))
            reference = resume.metadata.get("reference_L_c")
            rng = np.random.default_rng([cfg.seed, start_epoch])
        else:
            params = FieldParams.initialize(
                self.field_config, template.count, template.anchor_index, bank.bbox, seed=cfg.seed
            )
            state = AdamState.zeros(params.tensors)

        render_config = cfg.render_config()
        lam = cfg.effective_lambda
        log = None
        if self.output_dir is not None:
            self.output_dir.mkdir(parents=True, exist_ok=True)
            log = CsvLog(self.output_dir / "loss_log.csv", LOSS_LOG_COLUMNS)

        logger.info(
            "training %s variant: %d rays (%d foreground), %d parameters, epochs %d-%d",
            cfg.variant,
            len(bank),
            bank.foreground_count,
            params.n_parameters,
            start_epoch,
            cfg.epochs - 1,
        )
        result = TrainResult(params=params)
        for epoch in range(start_epoch, cfg.epochs):
            tau = cfg.tau(epoch)
            warp = cfg.use_warp and epoch >= cfg.warmup_epochs
            frozen = self.frozen_keys(params, epoch)
            batches = epoch_batches(bank, cfg.batch_size, rng)
            epoch_losses = []
            for indices in tqdm(batches, desc=f"epoch {epoch}", disable=not self.progress, leave=False):
                objective = BatchObjective(
                    RayBatch.from_bank(bank, indices),
                    bank.bbox,
                    render_config,
                    lam=lam,
                    tau=tau,
                    warp=warp,
                    n_void=cfg.void_samples,
                    seed=int(rng.integers(2**63 - 1)),
                )
                _, grads = forward_backward(params, objective)
                L_c, L_v, L_g = objective.parts
                adam_step(
                    params.tensors, grads, state, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps, frozen=frozen
                )
                breakdown = LossBreakdown.combine(epoch, step, L_c, L_v, L_g, lam, tau)
                epoch_losses.append(breakdown)
                if log is not None:
                    log.append(breakdown.to_dict())
                step += 1

            means = {
                "epoch": epoch,
                **{k: float(np.mean([getattr(b, k) for b in epoch_losses])) for k in ("L_c", "L_v", "L_g", "L_total")},
                "tau": tau,
            }
            if reference is None:
                reference = means["L_c"]
            elif means["L_c"] > cfg.divergence_factor * reference:
                raise TrainingDivergedError(epoch, means["L_c"], reference, cfg.divergence_factor)
            result.history.extend(epoch_losses)
            result.epoch_means.append(means)
            logger.info(
                "epoch %d: L_c=%.6f L_v=%.6f L_g=%.6f L_total=%.6f tau=%g%s",
                epoch,
                means["L_c"],
                means["L_v"],
                means["L_g"],
                means["L_total"],
                tau,
                " (warm-up)" if epoch < cfg.warmup_epochs else "",
            )
            if self.output_dir is not None:
                result.checkpoint = save_checkpoint(
                    self.output_dir / "checkpoints" / f"epoch_{epoch:03d}.npz",
                    params,
                    state.to_arrays(),
                    {"epoch": epoch, "step": step, "reference_L_c": reference, "train_config": cfg.to_dict()},
                )

        if self.output_dir is not None:
            result.checkpoint = save_checkpoint(
                self.output_dir / "field.npz",
                params,
                state.to_arrays(),
                {"epoch": cfg.epochs - 1, "step": step, "reference_L_c": reference, "train_config": cfg.to_dict()},
            )
        return result


def train(
    bank: RayBank,
    template: MirrorArrayTemplate,
    config: Optional[TrainConfig] = None,
    output_dir: Optional[Union[str, Path]] = None,
    progress: bool = False,
) -> TrainResult:
    """Train a field on a ray bank with :class:`Trainer`."""
    return Trainer(config, output_dir=output_dir, progress=progress).train(bank, template)
