#!/usr/bin/env python3
"""
cata-field CLI

Command-line interface for the catadioptric radiance-field pipeline.

Usage:
    cata-field simulate --mirrors 25 --sigma-mm 1.0 --output runs/demo
    cata-field calibrate runs/demo/correspondences.json --camera runs/demo/capture/calibration.json
    cata-field restore --output runs/demo
    cata-field train --epochs 10 --output runs/demo
    cata-field render --view-path arc.json --output runs/demo
    cata-field eval --rendered runs/demo/render --reference runs/demo/render/reference
    cata-field ablate --mirrors 7 13 --variants full no-warp no-reg

Every subcommand accepts ``--config project.json``; flags win over file
values. Exit codes: 0 success, 2 usage/configuration, 3 data, 4 numerical.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .calibration import (
    CameraCalibration,
    calibrate,
    load_correspondences,
    save_correspondences,
)
from .calibration.homography import MIN_CORRESPONDENCES
from .config import ProjectConfig
from .errors import CataFieldError, ConfigError
from .evalkit import AblationSetup, MetricsReport, RunMetrics, ViewMetrics, mirror_sweep, psnr, run_ablation, ssim
from .geometry import CameraIntrinsics
from .raybank import restore_rays
from .renderer import frontal_arc, load_camera_path, render_view, save_camera_path
from .simulator import (
    MirrorArrayTemplate,
    build_array_template,
    layout_for_count,
    marker_correspondences,
    perturb_template,
    render_capture,
    render_ground_truth_view,
    with_geometry,
)
from .storage import (
    UniversalImageLoader,
    load_capture,
    load_checkpoint,
    load_raybank,
    save_capture,
    save_raybank,
    write_pfm,
    write_png_rgb,
)
from .trainer import VARIANTS, Trainer

logger = logging.getLogger(__name__)


def create_parser() -> argparse.ArgumentParser:
    """Create the argument parser for the CLI.

    Returns:
        argparse.ArgumentParser: Configured argument parser with all subcommands
            (simulate, calibrate, restore, train, render, eval, ablate).
    """
    parser = argparse.ArgumentParser(
        prog="cata-field",
        description="Catadioptric mirror-array radiance fields: simulate, calibrate, restore, train, render, evaluate",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", "-c", type=str, help="Project JSON file (flags override its values)")
    common.add_argument("--output", "-o", type=str, help="Output directory (default: $CATA_FIELD_OUTPUT_DIR)")
    common.add_argument("--threads", type=int, help="Worker threads")
    common.add_argument("--seed", type=int, help="Random seed")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    verbosity.add_argument("--quiet", "-q", action="store_true", help="Warnings only, no progress bars")

    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    # Simulate command
    simulate_parser = subparsers.add_parser(
        "simulate", parents=[common], help="Ray trace a synthetic capture of a scene"
    )
    simulate_parser.add_argument("--scene", type=str, help="Scene JSON file (default: built-in sphere scene)")
    simulate_parser.add_argument("--mirrors", type=int, help="Mirror count (1, 5, 7, 13, 19 or 25)")
    simulate_parser.add_argument("--sigma-mm", type=float, help="Std. dev. of mirror center misplacement (mm)")
    simulate_parser.add_argument("--marker-noise", type=float, help="Std. dev. of marker pixel noise")
    simulate_parser.add_argument("--width", type=int, help="Capture width in pixels")
    simulate_parser.add_argument("--height", type=int, help="Capture height in pixels")

    # Calibrate command
    calibrate_parser = subparsers.add_parser(
        "calibrate", parents=[common], help="Estimate the camera pose from marker correspondences"
    )
    calibrate_parser.add_argument("correspondences", type=str, help="Correspondence JSON file")
    calibrate_parser.add_argument(
        "--camera", type=str, help="Calibration JSON providing the intrinsics (default: <output>/capture/calibration.json)"
    )
    calibrate_parser.add_argument(
        "--save", type=str, help="Where to write the estimate (default: <output>/calibration_estimated.json)"
    )

    # Restore command
    restore_parser = subparsers.add_parser(
        "restore", parents=[common], help="Turn a capture into a ray-bank file"
    )
    restore_parser.add_argument("--capture", type=str, help="Capture directory (default: <output>/capture)")
    restore_parser.add_argument("--template", type=str, help="Ideal template JSON (default: <output>/template.json)")
    restore_parser.add_argument(
        "--calibration", type=str, help="Calibration to restore with (default: the capture's own)"
    )
    restore_parser.add_argument("--scene", type=str, help="Scene JSON declaring the bounding box")
    restore_parser.add_argument("--rays", type=str, help="Ray-bank file to write (default: <output>/rays.bin)")

    # Train command
    train_parser = subparsers.add_parser("train", parents=[common], help="Train a field on a ray bank")
    train_parser.add_argument("--rays", type=str, help="Ray-bank file (default: <output>/rays.bin)")
    train_parser.add_argument("--template", type=str, help="Ideal template JSON (default: <output>/template.json)")
    train_parser.add_argument("--epochs", type=int, help="Number of epochs")
    train_parser.add_argument("--batch-size", type=int, help="Rays per step")
    train_parser.add_argument("--lr", type=float, help="Adam learning rate")
    train_parser.add_argument("--lam", type=float, help="Weight of the visual-hull and geometry losses")
    train_parser.add_argument("--variant", choices=list(VARIANTS), help="Method variant")
    train_parser.add_argument("--preset", choices=["large", "desk", "toy"], help="Network size preset")
    train_parser.add_argument("--resume", type=str, help="Checkpoint to continue from")

    # Render command
    render_parser = subparsers.add_parser("render", parents=[common], help="Render novel views of a trained field")
    render_parser.add_argument("--checkpoint", type=str, help="Checkpoint (default: <output>/train/field.npz)")
    render_parser.add_argument("--view-path", type=str, help="Camera path JSON (default: frontal arc from config)")
    render_parser.add_argument("--save-path", type=str, help="Write the camera path used to this JSON file")
    render_parser.add_argument("--width", type=int, help="Output width for the default arc")
    render_parser.add_argument("--height", type=int, help="Output height for the default arc")
    render_parser.add_argument("--depth", action="store_true", help="Also write PFM depth maps")
    render_parser.add_argument(
        "--reference", action="store_true", help="Also write ground-truth views of the scene to <render>/reference"
    )
    render_parser.add_argument("--scene", type=str, help="Scene JSON for --reference")

    # Eval command
    eval_parser = subparsers.add_parser("eval", parents=[common], help="Score rendered views against references")
    eval_parser.add_argument("--rendered", type=str, help="Directory of rendered PNGs (default: <output>/render)")
    eval_parser.add_argument(
        "--reference", type=str, help="Directory of reference PNGs with the same names (default: <rendered>/reference)"
    )
    eval_parser.add_argument("--variant", type=str, default="full", help="Variant label for the report")
    eval_parser.add_argument("--mirrors", type=int, help="Mirror count label for the report")
    eval_parser.add_argument("--sigma-mm", type=float, help="Perturbation label for the report")
    eval_parser.add_argument("--csv", type=str, help="Metrics CSV to write (default: <output>/metrics.csv)")

    # Ablate command
    ablate_parser = subparsers.add_parser(
        "ablate", parents=[common], help="Train and compare method variants on a shared capture"
    )
    ablate_parser.add_argument("--scene", type=str, help="Scene JSON file")
    ablate_parser.add_argument("--mirrors", type=int, nargs="+", help="Mirror counts (default: config value)")
    ablate_parser.add_argument("--sigma-mm", type=float, nargs="+", help="Perturbations (default: 2%% of diameter)")
    ablate_parser.add_argument("--variants", nargs="+", choices=list(VARIANTS), help="Variants to compare")
    ablate_parser.add_argument("--sweep", action="store_true", help="Full method over 5, 13 and 25 mirrors")
    ablate_parser.add_argument("--views", type=int, help="Number of novel views")
    ablate_parser.add_argument("--epochs", type=int, help="Epochs per run")
    ablate_parser.add_argument("--csv", type=str, help="Metrics CSV to write (default: <output>/ablation.csv)")

    return parser


def configure_logging(args) -> None:
    """Set up root logging from ``--verbose`` / ``--quiet``."""
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s: %(message)s")


def load_project(args, **flags) -> ProjectConfig:
    """Project config from ``--config`` with common and command flags applied."""
    config = ProjectConfig.from_json(args.config) if args.config else ProjectConfig()
    return config.override(output_dir=args.output, threads=args.threads, seed=args.seed, **flags)


def _output_path(config: ProjectConfig, given: Optional[str], *default: str) -> Path:
    return Path(given) if given else Path(config.output_dir, *default)


def _write_json(path: Path, data: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2), encoding="utf-8")


def _read_template(path: Path) -> MirrorArrayTemplate:
    if not path.exists():
        raise FileNotFoundError(f"Template file not found: {path} (run 'simulate' first or pass --template)")
    return MirrorArrayTemplate.from_dict(json.loads(path.read_text(encoding="utf-8")))


def cmd_simulate(args) -> int:
    """Render a synthetic capture and write every artifact of it.

    Writes ``capture/`` (image, maps, mask, ground-truth calibration), the
    ideal and true templates, marker correspondences, the scene and the
    resolved project file into the output directory.

    Args:
        args: Parsed command-line arguments.

    Returns:
        int: Exit code.
    """
    config = load_project(
        args,
        scene=args.scene,
        mirrors=args.mirrors,
        sigma_mm=args.sigma_mm,
        marker_noise_px=args.marker_noise,
        **{"camera.width": args.width, "camera.height": args.height},
    )
    out = Path(config.output_dir)
    scene = config.load_scene()
    config.bbox(scene)
    camera = config.camera.calibration()
    ideal = build_array_template(layout_for_count(config.mirrors))
    true = perturb_template(ideal, config.sigma_mm, seed=config.seed)

    print(f"Simulating {ideal.count}-mirror capture at {camera.K.width}x{camera.K.height}")
    print(f"Mirror perturbation: {config.sigma_mm:g} mm (seed {config.seed})")
    print("-" * 50)
    bundle = render_capture(scene, camera, true, ideal_template=ideal, threads=config.threads)
    save_capture(bundle, out / "capture")
    pairs = marker_correspondences(ideal, camera, config.marker_noise_px, seed=config.seed)
    save_correspondences(pairs, str(out / "correspondences.json"))
    _write_json(out / "template.json", ideal.to_dict())
    _write_json(out / "template_true.json", true.to_dict())
    scene.save(str(out / "scene.json"))
    _write_json(out / "project.json", {**config.to_dict(), "scene": "scene.json"})

    for key, value in bundle.summary().items():
        print(f"  {key}: {value}")
    print(f"  markers: {len(pairs)}")
    print(f"\nCapture written to: {out}")
    return 0


def cmd_calibrate(args) -> int:
    """Estimate the camera pose from marker correspondences and print the RMSE.

    Args:
        args: Parsed command-line arguments.

    Returns:
        int: Exit code.
    """
    config = load_project(args)
    pairs = load_correspondences(args.correspondences)
    if len(pairs) < MIN_CORRESPONDENCES:
        raise ConfigError(f"need at least {MIN_CORRESPONDENCES} correspondences, got {len(pairs)}")
    camera_path = _output_path(config, args.camera, "capture", "calibration.json")
    K = CameraCalibration.load(str(camera_path)).K

    calib = calibrate(pairs, K)
    target = _output_path(config, args.save, "calibration_estimated.json")
    target.parent.mkdir(parents=True, exist_ok=True)
    calib.save(str(target))

    print(f"Correspondences: {len(pairs)}")
    print(f"Reprojection RMSE: {calib.rmse_px:.6g} px")
    print(f"Camera center (mm): {np.array2string(calib.center, precision=4)}")
    print(f"\nCalibration written to: {target}")
    return 0


def cmd_restore(args) -> int:
    """Restore training rays from a capture directory.

    Template maps are re-rendered in double precision for the calibration
    used, which may be an estimated one.

    Args:
        args: Parsed command-line arguments.

    Returns:
        int: Exit code.
    """
    config = load_project(args, scene=args.scene)
    capture_dir = _output_path(config, args.capture, "capture")
    bundle = load_capture(capture_dir)
    template = _read_template(_output_path(config, args.template, "template.json"))
    calib = CameraCalibration.load(args.calibration) if args.calibration else bundle.calibration
    scene_file = Path(config.output_dir, "scene.json")
    if config.scene is None and scene_file.exists():
        config = config.override(scene=str(scene_file))
    bbox = config.bbox()

    bundle = with_geometry(bundle, calib, template, threads=config.threads)
    bank = restore_rays(bundle, calib, template, bbox)
    target = _output_path(config, args.rays, "rays.bin")
    target.parent.mkdir(parents=True, exist_ok=True)
    save_raybank(bank, target)

    summary = bank.summary()
    print(f"Restored rays: {summary['rays']} ({summary['foreground']} foreground, {summary['background']} background)")
    print(f"Rays per mirror: {summary['per_mirror']}")
    if summary["skipped"]:
        print(f"Skipped pixels: {summary['skipped']}")
    print(f"\nRay bank written to: {target}")
    return 0


def cmd_train(args) -> int:
    """Train a field on a ray bank; writes the loss log and checkpoints.

    Args:
        args: Parsed command-line arguments.

    Returns:
        int: Exit code.
    """
    config = load_project(
        args,
        **{
            "train.epochs": args.epochs,
            "train.batch_size": args.batch_size,
            "train.learning_rate": args.lr,
            "train.lam": args.lam,
            "train.variant": args.variant,
            "train.preset": args.preset,
        },
    )
    if args.seed is not None:
        config = config.override(**{"train.seed": args.seed})
    bank = load_raybank(_output_path(config, args.rays, "rays.bin"))
    template = _read_template(_output_path(config, args.template, "template.json"))
    resume = load_checkpoint(args.resume) if args.resume else None
    out = Path(config.output_dir, "train")

    print(f"Training {config.train.variant} variant ({config.train.preset} preset) on {len(bank)} rays")
    print("-" * 50)
    trainer = Trainer(config.train, output_dir=out, progress=not args.quiet)
    result = trainer.train(bank, template, resume=resume)

    for means in result.epoch_means:
        print(
            f"  epoch {means['epoch']:3d}  L_c {means['L_c']:.6f}  L_v {means['L_v']:.6f}  "
            f"L_g {means['L_g']:.6f}  L_total {means['L_total']:.6f}  tau {means['tau']:g}"
        )
    print(f"\nCheckpoint written to: {result.checkpoint}")
    print(f"Loss log written to: {out / 'loss_log.csv'}")
    return 0


def cmd_render(args) -> int:
    """Render one PNG per camera of a path (and optionally depth and references).

    Args:
        args: Parsed command-line arguments.

    Returns:
        int: Exit code.
    """
    config = load_project(args, scene=args.scene, **{"render.width": args.width, "render.height": args.height})
    out = Path(config.output_dir, "render")
    out.mkdir(parents=True, exist_ok=True)

    if args.view_path:
        cameras = load_camera_path(args.view_path)
    else:
        K = CameraIntrinsics.from_fov(config.render.width, config.render.height, config.views.fov_x_deg)
        center = config.bbox().center
        views = config.views
        cameras = frontal_arc(center, views.distance_mm, views.n_views, K, views.azimuth_deg, views.elevation_deg)
    if args.save_path:
        save_camera_path(cameras, args.save_path)

    checkpoint = load_checkpoint(_output_path(config, args.checkpoint, "train", "field.npz"))
    print(f"Rendering {len(cameras)} views")
    print("-" * 50)
    for k, camera in enumerate(cameras):
        view = render_view(
            checkpoint.params, camera, config.render, with_depth=args.depth, threads=config.threads, progress=not args.quiet
        )
        write_png_rgb(out / f"view_{k:03d}.png", view.rgb)
        if args.depth:
            write_pfm(out / f"view_{k:03d}_depth.pfm", view.depth)
    if args.reference:
        scene = config.load_scene()
        ref_dir = out / "reference"
        ref_dir.mkdir(parents=True, exist_ok=True)
        for k, camera in enumerate(cameras):
            write_png_rgb(ref_dir / f"view_{k:03d}.png", render_ground_truth_view(scene, camera, config.threads))
    print(f"Views written to: {out}")
    return 0


def cmd_eval(args) -> int:
    """Compute PSNR/SSIM of rendered views against same-named references.

    Args:
        args: Parsed command-line arguments.

    Returns:
        int: Exit code.
    """
    config = load_project(args)
    rendered_dir = _output_path(config, args.rendered, "render")
    reference_dir = Path(args.reference) if args.reference else rendered_dir / "reference"
    names = sorted(p.name for p in rendered_dir.glob("*.png"))
    if not names:
        raise FileNotFoundError(f"No rendered PNGs in {rendered_dir}")

    loader = UniversalImageLoader()
    run = RunMetrics(
        variant=args.variant,
        mirrors=args.mirrors if args.mirrors is not None else config.mirrors,
        sigma_mm=args.sigma_mm if args.sigma_mm is not None else config.sigma_mm,
    )
    for k, name in enumerate(names):
        a = loader.load(rendered_dir / name, "rgb")
        b = loader.load(reference_dir / name, "rgb")
        run.views.append(ViewMetrics(view=k, psnr=psnr(a, b), ssim=ssim(a, b)))
        print(f"  {name}: PSNR {run.views[-1].psnr:.3f} dB  SSIM {run.views[-1].ssim:.4f}")

    report = MetricsReport(runs=[run], seed=config.seed)
    target = report.write_csv(_output_path(config, args.csv, "metrics.csv"))
    print(report.format_table())
    print(f"\nMetrics written to: {target}")
    return 0


def cmd_ablate(args) -> int:
    """Run the ablation harness and print the comparison table.

    Args:
        args: Parsed command-line arguments.

    Returns:
        int: Exit code.
    """
    config = load_project(args, scene=args.scene, **{"train.epochs": args.epochs, "views.n_views": args.views})
    setup = AblationSetup(
        scene=config.load_scene(),
        train=config.train,
        capture_width=config.camera.width,
        capture_height=config.camera.height,
        n_views=config.views.n_views,
        view_width=config.render.width,
        view_height=config.render.height,
        view_fov_deg=config.views.fov_x_deg,
        view_distance_mm=config.views.distance_mm,
        azimuth_deg=config.views.azimuth_deg,
        elevation_deg=config.views.elevation_deg,
        seed=config.seed,
        threads=config.threads,
        progress=not args.quiet,
    )
    if args.sweep:
        sigma = args.sigma_mm[0] if args.sigma_mm else None
        report = mirror_sweep(setup, sigma_mm=sigma)
    else:
        report = run_ablation(
            setup,
            layouts=args.mirrors or [config.mirrors],
            sigmas_mm=args.sigma_mm,
            variants=args.variants or list(VARIANTS),
        )
    target = report.write_csv(_output_path(config, args.csv, "ablation.csv"))
    print(report.format_table("Ablation: mean novel-view quality"))
    print(f"\nMetrics written to: {target}")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "calibrate": cmd_calibrate,
    "restore": cmd_restore,
    "train": cmd_train,
    "render": cmd_render,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
}


def main(argv: Optional[list[str]] = None) -> int:
    """Main entry point for the cata-field CLI.

    Parses command-line arguments, dispatches to the command handler and maps
    errors to exit codes.

    Returns:
        int: 0 on success, 2 for usage errors, 3 for data errors and 4 for
            numerical failures.
    """
    parser = create_parser()
    args = parser.parse_args(argv)

    if args.command is None:
        parser.print_help()
        return 0

    configure_logging(args)
    try:
        return COMMANDS[args.command](args)
    except CataFieldError as e:
        print(f"Error: {e}", file=sys.stderr)
        return e.exit_code
    except FileNotFoundError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
