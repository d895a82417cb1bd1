"""
Image readers and writers: 8-bit RGB PNG, 16-bit index PNG, 1-bit mask PNG
and little-endian PFM float maps.
"""

from abc import ABC, abstractmethod
from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image

from ..errors import DataError

PathLike = Union[str, Path]


def to_uint8(image: np.ndarray) -> np.ndarray:
    """Quantize a [0, 1] float image to 8 bits (round to nearest)."""
    return np.clip(np.rint(np.asarray(image, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def write_png_rgb(path: PathLike, image: np.ndarray) -> None:
    """Write an (H, W, 3) float image in [0, 1] as 8-bit RGB PNG."""
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise DataError(f"expected an (H, W, 3) image, got shape {image.shape}")
    Image.fromarray(to_uint8(image), "RGB").save(Path(path), format="PNG")


def write_png_index(path: PathLike, index_map: np.ndarray) -> None:
    """Write an integer map (0 = none, else index + 1) as 16-bit grayscale PNG."""
    index_map = np.asarray(index_map)
    if index_map.min(initial=0) < 0 or index_map.max(initial=0) > np.iinfo(np.uint16).max:
        raise DataError("index map values must fit in 16 unsigned bits")
    Image.fromarray(index_map.astype(np.uint16)).save(Path(path), format="PNG")


def write_png_mask(path: PathLike, mask: np.ndarray) -> None:
    """Write a boolean mask as 1-bit PNG."""
    gray = np.asarray(mask, dtype=bool).astype(np.uint8) * 255
    Image.fromarray(gray).convert("1").save(Path(path), format="PNG")


def write_pfm(path: PathLike, data: np.ndarray) -> None:
    """Write a little-endian PFM (``Pf`` for (H, W), ``PF`` for (H, W, 3)).

    Rows are stored bottom-to-top as the format requires.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 2:
        tag = b"Pf"
    elif data.ndim == 3 and data.shape[2] == 3:
        tag = b"PF"
    else:
        raise DataError(f"PFM holds (H, W) or (H, W, 3) maps, got shape {data.shape}")
    height, width = data.shape[:2]
    header = tag + b"\n" + f"{width} {height}\n".encode("ascii") + b"-1.0\n"
    body = np.ascontiguousarray(data[::-1].astype("<f4")).tobytes()
    Path(path).write_bytes(header + body)


def read_pfm(path: PathLike) -> np.ndarray:
    """Read a PFM file into a float64 array with the top row first."""
    raw = Path(path).read_bytes()
    try:
        tag, dims, scale, body = raw.split(b"\n", 3)
        width, height = (int(x) for x in dims.split())
        scale_value = float(scale)
    except ValueError as e:
        raise DataError(f"{path} is not a PFM file: {e}") from e
    if tag not in (b"Pf", b"PF"):
        raise DataError(f"{path} has unknown PFM tag {tag!r}")
    channels = 3 if tag == b"PF" else 1
    dtype = "<f4" if scale_value < 0 else ">f4"
    expected = width * height * channels * 4
    if len(body) != expected:
        raise DataError(f"{path}: expected {expected} data bytes, found {len(body)}")
    data = np.frombuffer(body, dtype=dtype).astype(np.float64)
    shape = (height, width, 3) if channels == 3 else (height, width)
    return data.reshape(shape)[::-1].copy()


class ImageLoader(ABC):
    """Abstract base class for image loaders."""

    @abstractmethod
    def supports(self, path: str) -> bool:
        """Check if this loader handles the given file."""

    @abstractmethod
    def load(self, path: str, kind: str = "rgb") -> np.ndarray:
        """Load the file as an array."""


class PNGLoader(ImageLoader):
    """Loader for RGB, index and mask PNG files."""

    def supports(self, path: str) -> bool:
        """True for ``.png`` files."""
        return path.lower().endswith(".png")

    def load(self, path: str, kind: str = "rgb") -> np.ndarray:
        """Load a PNG.

        Args:
            path: PNG file.
            kind: ``"rgb"`` (float64 in [0, 1]), ``"index"`` (int32) or
                ``"mask"`` (bool).

        Returns:
            np.ndarray: Decoded image.

        Raises:
            FileNotFoundError: If the file does not exist.
            DataError: On an unknown kind or undecodable file.
        """
        if not Path(path).exists():
            raise FileNotFoundError(f"PNG file not found: {path}")
        try:
            with Image.open(path) as img:
                if kind == "rgb":
                    return np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
                if kind == "index":
                    return np.asarray(img, dtype=np.int32)
                if kind == "mask":
                    return np.asarray(img.convert("L")) > 127
        except OSError as e:
            raise DataError(f"cannot decode {path}: {e}") from e
        raise DataError(f"unknown PNG kind {kind!r}")


class PFMLoader(ImageLoader):
    """Loader for PFM float maps."""

    def supports(self, path: str) -> bool:
        """True for ``.pfm`` files."""
        return path.lower().endswith(".pfm")

    def load(self, path: str, kind: str = "float") -> np.ndarray:
        """Load a PFM map as float64."""
        if not Path(path).exists():
            raise FileNotFoundError(f"PFM file not found: {path}")
        return read_pfm(path)


class UniversalImageLoader:
    """Selects a loader by file extension."""

    def __init__(self):
        """Initialize with the PNG and PFM loaders."""
        self.loaders: list[ImageLoader] = [PNGLoader(), PFMLoader()]

    def load(self, path: PathLike, kind: str = "rgb") -> np.ndarray:
        """Load an image with the first loader that supports it.

        Raises:
            DataError: If no loader supports the file type.
        """
        path = str(path)
        for loader in self.loaders:
            if loader.supports(path):
                return loader.load(path, kind)
        raise DataError(f"Unsupported image type: {path}")
