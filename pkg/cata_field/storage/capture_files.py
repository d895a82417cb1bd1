"""
Capture bundle directory layout.

    image.png          8-bit RGB catadioptric image
    depth.pfm          template depth t_d (mm), inf off-mirror
    normals.pfm        camera-frame template normals
    index.png          16-bit mirror index + 1 (0 = none)
    mask.png           1-bit foreground mask
    calibration.json   calibration the maps were rendered with
"""

import logging
from pathlib import Path
from typing import Union

import numpy as np

from ..calibration import CameraCalibration
from ..errors import DataError
from ..simulator import CaptureBundle
from .images import UniversalImageLoader, write_pfm, write_png_index, write_png_mask, write_png_rgb

logger = logging.getLogger(__name__)

CAPTURE_FILES = {
    "image": "image.png",
    "depth": "depth.pfm",
    "normals": "normals.pfm",
    "index": "index.png",
    "mask": "mask.png",
    "calibration": "calibration.json",
}


def save_capture(bundle: CaptureBundle, directory: Union[str, Path]) -> dict[str, Path]:
    """Write every part of a capture bundle into ``directory``.

    Returns:
        dict[str, Path]: Written file per part.
    """
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    paths = {key: out / name for key, name in CAPTURE_FILES.items()}
    write_png_rgb(paths["image"], bundle.image)
    write_pfm(paths["depth"], bundle.depth)
    write_pfm(paths["normals"], bundle.normals)
    write_png_index(paths["index"], bundle.index_map)
    write_png_mask(paths["mask"], bundle.mask)
    bundle.calibration.save(str(paths["calibration"]))
    logger.info("wrote capture bundle to %s", out)
    return paths


def load_capture(directory: Union[str, Path]) -> CaptureBundle:
    """Read a capture bundle written by :func:`save_capture`.

    Maps come back in single precision; use
    :func:`cata_field.simulator.with_geometry` to restore from double
    precision template maps.

    Raises:
        FileNotFoundError: If a part is missing.
        DataError: If the parts disagree in size.
    """
    src = Path(directory)
    for name in CAPTURE_FILES.values():
        if not (src / name).exists():
            raise FileNotFoundError(f"capture part missing: {src / name}")
    loader = UniversalImageLoader()
    image = loader.load(src / CAPTURE_FILES["image"], "rgb")
    depth = loader.load(src / CAPTURE_FILES["depth"], "float")
    normals = loader.load(src / CAPTURE_FILES["normals"], "float")
    index_map = loader.load(src / CAPTURE_FILES["index"], "index")
    mask = loader.load(src / CAPTURE_FILES["mask"], "mask")
    calibration = CameraCalibration.load(str(src / CAPTURE_FILES["calibration"]))

    shape = image.shape[:2]
    for name, arr in (("depth", depth), ("normals", normals), ("index", index_map), ("mask", mask)):
        if arr.shape[:2] != shape:
            raise DataError(f"{name} map is {arr.shape[:2]}, image is {shape}")
    return CaptureBundle(
        image=image,
        depth=depth,
        normals=normals,
        index_map=index_map.astype(np.int32),
        mask=mask,
        calibration=calibration,
    )
