"""
Project configuration shared by the command-line stages.

A project is described by one JSON document; every section is optional and
unknown keys are rejected at every level:

    {
      "scene": "scene.json",
      "mirrors": 25,
      "sigma_mm": 1.0,
      "seed": 0,
      "output_dir": "runs/desk",
      "camera": {"width": 480, "height": 420, "distance_mm": 700, "fov_x_deg": 26},
      "views": {"n_views": 20, "fov_x_deg": 60, "distance_mm": 170},
      "train": {...TrainConfig...},
      "render": {...RenderConfig...}
    }

Command-line flags are applied on top with :meth:`ProjectConfig.override`.
"""

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Union

from .calibration import CameraCalibration
from .errors import ConfigError
from .raybank import BBox
from .renderer import RenderConfig
from .simulator import (
    DEFAULT_CAMERA_DISTANCE_MM,
    DEFAULT_CAMERA_FOV_DEG,
    AnalyticScene,
    capture_camera,
    default_scene,
    layout_for_count,
)
from .trainer import TrainConfig

OUTPUT_DIR_ENV = "CATA_FIELD_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "cata_field_out"


def default_output_dir() -> str:
    """Output directory from ``CATA_FIELD_OUTPUT_DIR`` or the built-in default."""
    return os.environ.get(OUTPUT_DIR_ENV, DEFAULT_OUTPUT_DIR)


def _strict(cls, data: dict, section: str):
    if not isinstance(data, dict):
        raise ConfigError(f"section {section!r} must be an object")
    unknown = set(data) - {f.name for f in fields(cls)}
    if unknown:
        raise ConfigError(f"unknown keys in {section!r}: {sorted(unknown)}")
    try:
        return cls(**data)
    except TypeError as e:
        raise ConfigError(f"invalid {section!r} section: {e}") from e


@dataclass
class CameraSpec:
    """Capturing camera, placed on the optical axis of the array."""

    width: int = 480
    height: int = 420
    distance_mm: float = DEFAULT_CAMERA_DISTANCE_MM
    fov_x_deg: float = DEFAULT_CAMERA_FOV_DEG
    offset_mm: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ConfigError("camera resolution must be positive")
        if self.distance_mm <= 0 or not 0 < self.fov_x_deg < 180:
            raise ConfigError("camera distance must be positive and fov within (0, 180)")
        self.offset_mm = tuple(self.offset_mm)

    def calibration(self) -> CameraCalibration:
        """Ground-truth calibration of this camera."""
        return capture_camera(self.width, self.height, self.distance_mm, self.fov_x_deg, self.offset_mm)


@dataclass
class ViewSpec:
    """Novel-view arc around the subject.

    The resolution comes from the render section.
    """

    n_views: int = 20
    fov_x_deg: float = 60.0
    distance_mm: float = 170.0
    azimuth_deg: float = 30.0
    elevation_deg: float = 15.0

    def __post_init__(self):
        if self.n_views < 1:
            raise ConfigError("n_views must be >= 1")
        if self.distance_mm <= 0 or not 0 < self.fov_x_deg < 180:
            raise ConfigError("view distance must be positive and fov within (0, 180)")


@dataclass
class ProjectConfig:
    """Everything a pipeline run needs besides its input files."""

    scene: Optional[str] = None
    mirrors: int = 25
    sigma_mm: float = 0.0
    marker_noise_px: float = 0.0
    seed: int = 0
    threads: int = 1
    output_dir: str = field(default_factory=default_output_dir)
    camera: CameraSpec = field(default_factory=CameraSpec)
    views: ViewSpec = field(default_factory=ViewSpec)
    train: TrainConfig = field(default_factory=TrainConfig.desk)
    render: RenderConfig = field(default_factory=RenderConfig.desk)

    def __post_init__(self):
        layout_for_count(self.mirrors)
        if self.sigma_mm < 0 or self.marker_noise_px < 0:
            raise ConfigError("sigma_mm and marker_noise_px must be nonnegative")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")

    @classmethod
    def from_dict(cls, data: dict) -> "ProjectConfig":
        """Build from a parsed JSON document.

        Raises:
            ConfigError: On unknown keys or invalid values in any section.
        """
        data = dict(data)
        sections = {
            "camera": CameraSpec,
            "views": ViewSpec,
            "train": TrainConfig,
            "render": RenderConfig,
        }
        for key, section_cls in sections.items():
            if key in data:
                data[key] = _strict(section_cls, data[key], key)
        return _strict(cls, data, "project")

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> "ProjectConfig":
        """Load a project file; relative scene paths resolve against it.

        Raises:
            FileNotFoundError: If the file does not exist.
            ConfigError: If it is not valid JSON or fails validation.
        """
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Config file not found: {path}")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path} is not valid JSON: {e}") from e
        config = cls.from_dict(data)
        if config.scene is not None and not Path(config.scene).is_absolute():
            config.scene = str(path.parent / config.scene)
        return config

    def override(self, **flags) -> "ProjectConfig":
        """Copy with flag values applied; None means "not given".

        Keys may name project fields or ``train.<field>`` / ``render.<field>``
        / ``camera.<field>`` / ``views.<field>`` entries.
        """
        top, nested = {}, {}
        for key, value in flags.items():
            if value is None:
                continue
            section, _, name = key.partition(".")
            if name:
                nested.setdefault(section, {})[name] = value
            else:
                top[key] = value
        try:
            for section, values in nested.items():
                top[section] = replace(getattr(self, section), **values)
            return replace(self, **top)
        except (TypeError, AttributeError) as e:
            raise ConfigError(f"invalid override: {e}") from e

    def load_scene(self) -> AnalyticScene:
        """Scene from the configured file, or the built-in default scene."""
        if self.scene is None:
            return default_scene()
        return AnalyticScene.load(self.scene)

    def bbox(self, scene: Optional[AnalyticScene] = None) -> BBox:
        """Sampling box declared by the scene.

        Raises:
            ConfigError: If the scene declares no box.
        """
        scene = scene or self.load_scene()
        if scene.bbox_min is None or scene.bbox_max is None:
            raise ConfigError("the scene file must declare a bounding box")
        return BBox(min=scene.bbox_min, max=scene.bbox_max)

    def to_dict(self) -> dict:
        """Convert to the JSON layout read by :meth:`from_dict`."""
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data["camera"] = asdict(self.camera)
        data["camera"]["offset_mm"] = list(self.camera.offset_mm)
        data["views"] = asdict(self.views)
        data["train"] = self.train.to_dict()
        data["render"] = self.render.to_dict()
        return data
