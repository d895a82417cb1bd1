"""
Ablation harness: train several variants on the same perturbed capture and
score them on a shared set of novel views.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from ..calibration import CameraCalibration
from ..errors import NonFiniteError, TrainingDivergedError
from ..geometry import CameraIntrinsics
from ..neuralfield import FieldParams
from ..raybank import BBox, RayBank, restore_rays
from ..renderer import RenderConfig, frontal_arc, render_view
from ..simulator import (
    DEFAULT_DIAMETER_MM,
    AnalyticScene,
    MirrorArrayTemplate,
    build_array_template,
    capture_camera,
    default_scene,
    layout_for_count,
    perturb_template,
    render_capture,
    render_ground_truth_view,
)
from ..trainer import TrainConfig, Trainer
from .metrics import psnr, ssim
from .report import MetricsReport, RunMetrics, ViewMetrics, config_hash

logger = logging.getLogger(__name__)

MIRROR_SWEEP = (5, 13, 25)


@dataclass
class AblationSetup:
    """Shared protocol of an ablation.

    Attributes:
        scene: Subject in front of the array.
        train: Optimization settings; ``variant`` is overridden per run.
        capture_width: Capture resolution (columns).
        capture_height: Capture resolution (rows).
        n_views: Number of novel views on the frontal arc.
        view_width: Novel-view resolution (columns).
        view_height: Novel-view resolution (rows).
        view_fov_deg: Horizontal field of view of the novel views.
        view_distance_mm: Distance of the novel cameras from the subject.
        azimuth_deg: Half range of the arc azimuth.
        elevation_deg: Amplitude of the arc elevation.
        seed: Seed of the mirror perturbation.
        threads: Worker threads for capture and rendering.
        progress: Show progress bars.
    """

    scene: AnalyticScene = field(default_factory=default_scene)
    train: TrainConfig = field(default_factory=TrainConfig.desk)
    capture_width: int = 480
    capture_height: int = 420
    n_views: int = 20
    view_width: int = 64
    view_height: int = 48
    view_fov_deg: float = 60.0
    view_distance_mm: float = 170.0
    azimuth_deg: float = 30.0
    elevation_deg: float = 15.0
    seed: int = 0
    threads: int = 1
    progress: bool = False

    @property
    def bbox(self) -> BBox:
        """Sampling box of the scene."""
        return BBox(min=np.asarray(self.scene.bbox_min), max=np.asarray(self.scene.bbox_max))

    def cameras(self) -> list[CameraCalibration]:
        """Shared novel-view cameras."""
        K = CameraIntrinsics.from_fov(self.view_width, self.view_height, self.view_fov_deg)
        return frontal_arc(
            self.bbox.center, self.view_distance_mm, self.n_views, K, self.azimuth_deg, self.elevation_deg
        )

    def to_dict(self) -> dict:
        """Protocol values for the report hash."""
        return {
            "scene": self.scene.to_dict(),
            "train": self.train.to_dict(),
            "capture": [self.capture_width, self.capture_height],
            "views": [self.n_views, self.view_width, self.view_height, self.view_fov_deg, self.view_distance_mm],
            "arc": [self.azimuth_deg, self.elevation_deg],
            "seed": self.seed,
        }


def default_sigma_mm() -> float:
    """Mirror placement noise of 2% of the mirror diameter."""
    return 0.02 * DEFAULT_DIAMETER_MM


def prepare_bank(setup: AblationSetup, mirrors: int, sigma_mm: float) -> tuple[RayBank, MirrorArrayTemplate]:
    """Simulate a misaligned capture and restore rays with the ideal template."""
    ideal = build_array_template(layout_for_count(mirrors))
    true = perturb_template(ideal, sigma_mm, seed=setup.seed)
    camera = capture_camera(setup.capture_width, setup.capture_height)
    bundle = render_capture(setup.scene, camera, true, ideal_template=ideal, threads=setup.threads)
    return restore_rays(bundle, camera, ideal, setup.bbox), ideal


def evaluate_views(
    params: FieldParams,
    cameras: Sequence[CameraCalibration],
    references: Sequence[np.ndarray],
    render_config: RenderConfig,
    threads: int = 1,
) -> list[ViewMetrics]:
    """Render every camera and score it against its reference image."""
    scores = []
    for k, (camera, reference) in enumerate(zip(cameras, references)):
        rendered = render_view(params, camera, render_config, threads=threads)
        scores.append(ViewMetrics(view=k, psnr=psnr(rendered.rgb, reference), ssim=ssim(rendered.rgb, reference)))
    return scores


def run_ablation(
    setup: AblationSetup,
    layouts: Sequence[int] = (13,),
    sigmas_mm: Optional[Sequence[float]] = None,
    variants: Sequence[str] = ("full", "no-warp", "no-reg"),
) -> MetricsReport:
    """Train and score every (mirror count, perturbation, variant) combination.

    All variants of one (count, perturbation) pair share the capture, the
    seed and the novel views. A variant that diverges or turns non-finite is
    reported with its failure status instead of being dropped.

    Returns:
        MetricsReport: One run per combination.
    """
    sigmas_mm = [default_sigma_mm()] if sigmas_mm is None else list(sigmas_mm)
    cameras = setup.cameras()
    references = [render_ground_truth_view(setup.scene, c, threads=setup.threads) for c in cameras]
    report = MetricsReport(seed=setup.train.seed, config_hash=config_hash(setup.to_dict()))
    report.metadata = {"n_views": len(cameras), "layouts": list(layouts), "sigmas_mm": sigmas_mm}

    for mirrors in layouts:
        for sigma_mm in sigmas_mm:
            bank, template = prepare_bank(setup, mirrors, sigma_mm)
            for variant in variants:
                config = replace(setup.train, variant=variant)
                run = RunMetrics(variant=variant, mirrors=mirrors, sigma_mm=sigma_mm)
                logger.info("ablation run: %s, %d mirrors, sigma %.3g mm", variant, mirrors, sigma_mm)
                try:
                    result = Trainer(config, progress=setup.progress).train(bank, template)
                    run.views = evaluate_views(
                        result.params, cameras, references, config.render_config(), threads=setup.threads
                    )
                except TrainingDivergedError as e:
                    run.status, run.detail = "diverged", str(e)
                    logger.warning("%s diverged: %s", variant, e)
                except NonFiniteError as e:
                    run.status, run.detail = "non-finite", str(e)
                    logger.warning("%s failed: %s", variant, e)
                report.runs.append(run)
                logger.info("%s: PSNR %.3f dB, SSIM %.4f", variant, run.mean_psnr, run.mean_ssim)
    return report


def mirror_sweep(
    setup: AblationSetup, counts: Sequence[int] = MIRROR_SWEEP, sigma_mm: Optional[float] = None
) -> MetricsReport:
    """Full-method scores for several mirror counts."""
    sigma = default_sigma_mm() if sigma_mm is None else sigma_mm
    return run_ablation(setup, layouts=counts, sigmas_mm=[sigma], variants=("full",))
