"""
Metric reports: per-view rows, per-run means, CSV output and a terminal
table.
"""

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from ..storage import CsvLog

METRICS_COLUMNS = ("variant", "mirrors", "sigma_mm", "view", "psnr", "ssim", "status")


def config_hash(config: dict) -> str:
    """Short stable hash of a JSON-serializable configuration."""
    blob = json.dumps(config, sort_keys=True, default=str).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:12]


@dataclass
class ViewMetrics:
    """Scores of one rendered view."""

    view: int
    psnr: float
    ssim: float


@dataclass
class RunMetrics:
    """Scores of one trained variant over the shared view set.

    ``status`` is ``ok`` or a failure tag (``diverged``, ``non-finite``);
    failed runs keep their row with NaN scores.
    """

    variant: str
    mirrors: int
    sigma_mm: float
    views: list[ViewMetrics] = field(default_factory=list)
    status: str = "ok"
    detail: Optional[str] = None

    @property
    def mean_psnr(self) -> float:
        """Mean PSNR over the views (NaN when there are none)."""
        return float(np.mean([v.psnr for v in self.views])) if self.views else math.nan

    @property
    def mean_ssim(self) -> float:
        """Mean SSIM over the views (NaN when there are none)."""
        return float(np.mean([v.ssim for v in self.views])) if self.views else math.nan


@dataclass
class MetricsReport:
    """All runs of an evaluation plus the metadata they share."""

    runs: list[RunMetrics] = field(default_factory=list)
    seed: Optional[int] = None
    config_hash: Optional[str] = None
    metadata: dict = field(default_factory=dict)

    def find(self, variant: str, mirrors: Optional[int] = None, sigma_mm: Optional[float] = None) -> RunMetrics:
        """First run matching the given keys.

        Raises:
            KeyError: If no run matches.
        """
        for run in self.runs:
            if run.variant != variant:
                continue
            if mirrors is not None and run.mirrors != mirrors:
                continue
            if sigma_mm is not None and not math.isclose(run.sigma_mm, sigma_mm):
                continue
            return run
        raise KeyError(f"no run for variant={variant} mirrors={mirrors} sigma_mm={sigma_mm}")

    def rows(self) -> list[dict]:
        """One CSV row per view, and one ``view=-1`` row per failed run."""
        out = []
        for run in self.runs:
            base = {"variant": run.variant, "mirrors": run.mirrors, "sigma_mm": run.sigma_mm}
            if run.status != "ok" or not run.views:
                out.append({**base, "view": -1, "psnr": math.nan, "ssim": math.nan, "status": run.status})
                continue
            for v in run.views:
                out.append({**base, "view": v.view, "psnr": v.psnr, "ssim": v.ssim, "status": run.status})
        return out

    def write_csv(self, path: Union[str, Path]) -> Path:
        """Write :meth:`rows` with the metrics header."""
        log = CsvLog(path, METRICS_COLUMNS)
        for row in self.rows():
            log.append(row)
        return log.path

    def to_dict(self) -> dict:
        """Convert to a JSON-friendly dictionary."""
        return {
            "seed": self.seed,
            "config_hash": self.config_hash,
            "metadata": self.metadata,
            "runs": [
                {
                    "variant": r.variant,
                    "mirrors": r.mirrors,
                    "sigma_mm": r.sigma_mm,
                    "status": r.status,
                    "detail": r.detail,
                    "mean_psnr": r.mean_psnr,
                    "mean_ssim": r.mean_ssim,
                    "views": [{"view": v.view, "psnr": v.psnr, "ssim": v.ssim} for v in r.views],
                }
                for r in self.runs
            ],
        }

    def format_table(self, title: str = "Novel-view quality") -> str:
        """Terminal table of mean scores with a PSNR bar per run."""
        if not self.runs:
            return "No runs to display"
        lines = [f"\n{title}", "=" * len(title)]
        lines.append(f"{'variant':<10} {'mirrors':>7} {'sigma_mm':>8} {'PSNR':>8} {'SSIM':>7}  {'':20}  status")
        finite = [r.mean_psnr for r in self.runs if math.isfinite(r.mean_psnr)]
        top = max(finite) if finite else 1.0
        for r in self.runs:
            p = r.mean_psnr
            if math.isfinite(p) and top > 0:
                bar_len = max(0, min(20, int(p / top * 20)))
            else:
                bar_len = 0
            bar = "█" * bar_len + "░" * (20 - bar_len)
            lines.append(
                f"{r.variant:<10} {r.mirrors:>7} {r.sigma_mm:>8.3g} {p:>8.3f} {r.mean_ssim:>7.4f} │{bar}│ {r.status}"
            )
        return "\n".join(lines)
