"""Trainer module: losses, threshold schedule, Adam and the training loop."""

from .losses import (
    LossBreakdown,
    loss_geometry,
    loss_geometry_grad,
    loss_photometric,
    loss_photometric_grad,
    loss_visual_hull,
    loss_visual_hull_grad,
    sample_void_points,
)
from .loop import LOSS_LOG_COLUMNS, VARIANTS, TrainConfig, Trainer, TrainResult, epoch_batches, train
from .objective import BatchObjective, RayBatch
from .optim import AdamState, adam_step, tau_schedule

__all__ = [
    "LossBreakdown",
    "loss_geometry",
    "loss_geometry_grad",
    "loss_photometric",
    "loss_photometric_grad",
    "loss_visual_hull",
    "loss_visual_hull_grad",
    "sample_void_points",
    "LOSS_LOG_COLUMNS",
    "VARIANTS",
    "TrainConfig",
    "Trainer",
    "TrainResult",
    "epoch_batches",
    "train",
    "BatchObjective",
    "RayBatch",
    "AdamState",
    "adam_step",
    "tau_schedule",
]
