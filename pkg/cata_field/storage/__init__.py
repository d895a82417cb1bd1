"""Storage module: images, capture bundles, ray banks, checkpoints and tables."""

from .capture_files import CAPTURE_FILES, load_capture, save_capture
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .images import (
    ImageLoader,
    PFMLoader,
    PNGLoader,
    UniversalImageLoader,
    read_pfm,
    to_uint8,
    write_pfm,
    write_png_index,
    write_png_mask,
    write_png_rgb,
)
from .raybank_file import RECORD_DTYPE, load_raybank, save_raybank, sidecar_path
from .tables import CsvLog, read_csv

__all__ = [
    "CAPTURE_FILES",
    "load_capture",
    "save_capture",
    "Checkpoint",
    "load_checkpoint",
    "save_checkpoint",
    "ImageLoader",
    "PFMLoader",
    "PNGLoader",
    "UniversalImageLoader",
    "read_pfm",
    "to_uint8",
    "write_pfm",
    "write_png_index",
    "write_png_mask",
    "write_png_rgb",
    "RECORD_DTYPE",
    "load_raybank",
    "save_raybank",
    "sidecar_path",
    "CsvLog",
    "read_csv",
]
