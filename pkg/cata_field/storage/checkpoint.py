"""
Field checkpoints.

A checkpoint is an uncompressed ``numpy.savez`` archive:

    meta                 JSON bytes (format, version, field config, bbox,
                         mirror count, anchor, training metadata)
    param/<name>         every parameter tensor
    optim/<name>         optimizer state arrays (optional)

Arrays are stored in their native dtype, so a save/load round trip is
bit-exact.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from ..errors import DataError
from ..neuralfield import FieldConfig, FieldParams
from ..raybank import BBox

logger = logging.getLogger(__name__)

FORMAT = "cata-field-checkpoint"
VERSION = 1
PARAM_PREFIX = "param/"
OPTIM_PREFIX = "optim/"


@dataclass
class Checkpoint:
    """Loaded checkpoint contents."""

    params: FieldParams
    optimizer: dict[str, np.ndarray] = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)


def save_checkpoint(
    path: Union[str, Path],
    params: FieldParams,
    optimizer: Optional[dict[str, np.ndarray]] = None,
    metadata: Optional[dict] = None,
) -> Path:
    """Write parameters and optimizer state.

    Args:
        path: Target file; ``.npz`` is appended by numpy when missing.
        params: Field parameters.
        optimizer: Flat optimizer state arrays.
        metadata: Extra JSON-serializable values (epoch, step, config).

    Returns:
        Path: The written file.
    """
    meta = {
        "format": FORMAT,
        "version": VERSION,
        "field_config": params.config.to_dict(),
        "bbox": params.bbox.to_dict(),
        "n_mirrors": params.n_mirrors,
        "anchor_index": params.anchor_index,
        "metadata": metadata or {},
    }
    arrays = {"meta": np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)}
    arrays.update({PARAM_PREFIX + k: v for k, v in params.tensors.items()})
    arrays.update({OPTIM_PREFIX + k: v for k, v in (optimizer or {}).items()})
    path = Path(path)
    if path.suffix != ".npz":
        path = path.with_name(path.name + ".npz")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        np.savez(f, **arrays)
    logger.debug("wrote checkpoint %s (%d tensors)", path, len(params.tensors))
    return path


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    """Read a checkpoint written by :func:`save_checkpoint`.

    Raises:
        FileNotFoundError: If the file does not exist.
        DataError: On an unknown format, version or missing tensors.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Checkpoint not found: {path}")
    try:
        with np.load(path, allow_pickle=False) as archive:
            meta = json.loads(archive["meta"].tobytes().decode("utf-8"))
            tensors = {k[len(PARAM_PREFIX):]: archive[k] for k in archive.files if k.startswith(PARAM_PREFIX)}
            optimizer = {k[len(OPTIM_PREFIX):]: archive[k] for k in archive.files if k.startswith(OPTIM_PREFIX)}
    except (OSError, ValueError, KeyError) as e:
        raise DataError(f"unreadable checkpoint {path}: {e}") from e

    if meta.get("format") != FORMAT:
        raise DataError(f"{path} is not a field checkpoint")
    if meta.get("version") != VERSION:
        raise DataError(f"unsupported checkpoint version {meta.get('version')} (expected {VERSION})")

    config = FieldConfig.from_dict(meta["field_config"])
    bbox = BBox.from_dict(meta["bbox"])
    expected = FieldParams.initialize(config, meta["n_mirrors"], meta["anchor_index"], bbox).tensors
    missing = set(expected) - set(tensors)
    if missing:
        raise DataError(f"checkpoint {path} lacks tensors {sorted(missing)}")
    for key, value in expected.items():
        if tensors[key].shape != value.shape:
            raise DataError(f"tensor {key} has shape {tensors[key].shape}, expected {value.shape}")

    params = FieldParams(
        config=config,
        tensors={k: tensors[k] for k in expected},
        n_mirrors=meta["n_mirrors"],
        anchor_index=meta["anchor_index"],
        bbox=bbox,
    )
    return Checkpoint(params=params, optimizer=optimizer, metadata=meta.get("metadata", {}))
