"""
Binary ray-bank file.

Byte layout (all values little-endian):

    offset  size  field
    0       8     magic  b"CATARAYS"
    8       4     u32    format version (1)
    12      4     u32    record size in bytes (48)
    16      8     u64    record count N
    24      48*N  records

Record layout (48 bytes, no alignment padding):

    0   12  3 x f32  origin (mm)
    12  12  3 x f32  direction (unit)
    24  12  3 x f32  color (RGB in [0, 1])
    36  2   u16      mirror index
    38  1   u8       flags (bit 0: foreground)
    39  1   u8       pad (0)
    40  4   u32      pixel u (column)
    44  4   u32      pixel v (row)

The bounding box, mirror count and restoration statistics are written to a
JSON sidecar ``<file>.json``. Values are stored in single precision, so
directions are renormalized on load.
"""

import json
import logging
import struct
from pathlib import Path
from typing import Union

import numpy as np

from ..errors import DataError
from ..raybank import BBox, RayBank

logger = logging.getLogger(__name__)

MAGIC = b"CATARAYS"
VERSION = 1
HEADER = struct.Struct("<8sIIQ")
FLAG_FOREGROUND = 0x01

RECORD_DTYPE = np.dtype(
    [
        ("origin", "<f4", (3,)),
        ("direction", "<f4", (3,)),
        ("color", "<f4", (3,)),
        ("mirror", "<u2"),
        ("flags", "u1"),
        ("pad", "u1"),
        ("u", "<u4"),
        ("v", "<u4"),
    ]
)
assert RECORD_DTYPE.itemsize == 48


def sidecar_path(path: Union[str, Path]) -> Path:
    """Path of the JSON sidecar belonging to a ray-bank file."""
    path = Path(path)
    return path.with_name(path.name + ".json")


def save_raybank(bank: RayBank, path: Union[str, Path]) -> None:
    """Write the binary ray bank and its JSON sidecar."""
    records = np.zeros(len(bank), dtype=RECORD_DTYPE)
    records["origin"] = bank.origins
    records["direction"] = bank.directions
    records["color"] = bank.colors
    records["mirror"] = bank.mirror_index
    records["flags"] = np.where(bank.foreground, FLAG_FOREGROUND, 0)
    records["u"] = bank.pixels[:, 0]
    records["v"] = bank.pixels[:, 1]

    path = Path(path)
    path.write_bytes(HEADER.pack(MAGIC, VERSION, RECORD_DTYPE.itemsize, len(bank)) + records.tobytes())
    sidecar = {
        "format": "cata_field.raybank",
        "version": VERSION,
        "bbox": bank.bbox.to_dict(),
        **bank.summary(),
    }
    sidecar_path(path).write_text(json.dumps(sidecar, indent=2), encoding="utf-8")
    logger.info("wrote %d rays to %s", len(bank), path)


def load_raybank(path: Union[str, Path]) -> RayBank:
    """Read a ray bank written by :func:`save_raybank`.

    Raises:
        FileNotFoundError: If the file or its sidecar is missing.
        DataError: On a bad header, truncated data or malformed sidecar.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Ray bank file not found: {path}")
    meta_path = sidecar_path(path)
    if not meta_path.exists():
        raise FileNotFoundError(f"Ray bank sidecar not found: {meta_path}")

    raw = path.read_bytes()
    if len(raw) < HEADER.size:
        raise DataError(f"{path} is too short to be a ray bank")
    magic, version, record_size, count = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DataError(f"{path} is not a ray bank file (magic {magic!r})")
    if version != VERSION or record_size != RECORD_DTYPE.itemsize:
        raise DataError(f"{path}: unsupported version {version} / record size {record_size}")
    body = raw[HEADER.size:]
    if len(body) != count * record_size:
        raise DataError(f"{path}: expected {count} records, found {len(body) / record_size:g}")
    records = np.frombuffer(body, dtype=RECORD_DTYPE)

    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        bbox = BBox.from_dict(meta["bbox"])
        n_mirrors = int(meta["n_mirrors"])
        skipped = {str(k): int(v) for k, v in meta.get("skipped", {}).items()}
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"malformed ray bank sidecar {meta_path}: {e}") from e

    directions = records["direction"].astype(np.float64)
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    return RayBank(
        origins=records["origin"].astype(np.float64),
        directions=directions,
        colors=records["color"].astype(np.float64),
        mirror_index=records["mirror"].astype(np.int64),
        foreground=(records["flags"] & FLAG_FOREGROUND) != 0,
        pixels=np.stack([records["u"], records["v"]], axis=1).astype(np.int64),
        bbox=bbox,
        n_mirrors=n_mirrors,
        skipped=skipped,
    )
