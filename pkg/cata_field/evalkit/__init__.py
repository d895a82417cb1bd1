"""Evaluation module: image metrics, reports and the ablation harness."""

from .ablation import MIRROR_SWEEP, AblationSetup, default_sigma_mm, evaluate_views, mirror_sweep, prepare_bank, run_ablation
from .metrics import PSNR_CAP_DB, gaussian_window, psnr, ssim, to_luma
from .report import METRICS_COLUMNS, MetricsReport, RunMetrics, ViewMetrics, config_hash

__all__ = [
    "MIRROR_SWEEP",
    "AblationSetup",
    "default_sigma_mm",
    "evaluate_views",
    "mirror_sweep",
    "prepare_bank",
    "run_ablation",
    "PSNR_CAP_DB",
    "gaussian_window",
    "psnr",
    "ssim",
    "to_luma",
    "METRICS_COLUMNS",
    "MetricsReport",
    "RunMetrics",
    "ViewMetrics",
    "config_hash",
]
