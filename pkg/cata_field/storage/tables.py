"""
Append-only CSV tables (loss logs, metrics reports).
"""

import csv
from pathlib import Path
from typing import Sequence, Union

from ..errors import DataError


class CsvLog:
    """CSV file with a fixed header, written row by row.

    The file is truncated on construction; every :meth:`append` is flushed
    so a crashed run keeps the rows written so far.
    """

    def __init__(self, path: Union[str, Path], columns: Sequence[str]):
        """Create the file and write the header."""
        self.path = Path(path)
        self.columns = list(columns)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "w", newline="", encoding="utf-8") as f:
            csv.writer(f).writerow(self.columns)

    def append(self, row: dict) -> None:
        """Append one row; keys must match the header."""
        extra = set(row) - set(self.columns)
        if extra:
            raise DataError(f"unknown columns {sorted(extra)} for {self.path.name}")
        with open(self.path, "a", newline="", encoding="utf-8") as f:
            csv.DictWriter(f, fieldnames=self.columns).writerow({k: _format(row.get(k, "")) for k in self.columns})


def _format(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def read_csv(path: Union[str, Path]) -> list[dict[str, str]]:
    """Read a CSV table into one dictionary per row.

    Raises:
        FileNotFoundError: If the file does not exist.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Table not found: {path}")
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))
