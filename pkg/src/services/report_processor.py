import csv
import io
import os
import tempfile
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import structlog
from scipy.stats import linregress

from ..models.data_models import ErrorReport
from ..utils.error_handler import ConfigurationError

logger = structlog.get_logger()

CSV_COLUMNS = [
    "params",
    "mesh",
    "h",
    "N_dof",
    "energy_err",
    "h_p1_seminorm_err",
    "l2_err",
    "assemble_s",
    "solve_s",
]

SLOPE_COLUMNS = {
    "energy": "energy_err",
    "h_p1_seminorm": "h_p1_seminorm_err",
    "l2": "l2_err",
}


class ReportProcessor:
    """Turns error reports into CSV rows and convergence rates"""

    def __init__(self, deterministic: bool = False):
        self.deterministic = deterministic

    def to_row(self, report: ErrorReport) -> Dict[str, str]:
        """CSV row; floats as repr so reruns compare byte for byte"""
        timing = (lambda _: "0.0") if self.deterministic else repr
        return {
            "params": report.params,
            "mesh": report.mesh,
            "h": repr(report.h),
            "N_dof": str(report.n_dof),
            "energy_err": repr(report.energy_err),
            "h_p1_seminorm_err": repr(report.h_p1_seminorm_err),
            "l2_err": repr(report.l2_err),
            "assemble_s": timing(report.assemble_s),
            "solve_s": timing(report.solve_s),
        }

    def render_csv(self, reports: List[ErrorReport]) -> str:
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for report in reports:
            writer.writerow(self.to_row(report))
        return buffer.getvalue()

    def write_csv(self, path: str | Path, reports: List[ErrorReport]) -> Path:
        """Write atomically: temp file in the target directory, then rename."""
        target = Path(path)
        directory = target.parent if str(target.parent) else Path(".")
        if not directory.is_dir():
            raise ConfigurationError(f"output directory '{directory}' does not exist")
        text = self.render_csv(reports)
        fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", dir=directory)
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
                handle.write(text)
            os.replace(tmp, target)
        except Exception:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        logger.info("CSV written", path=str(target), rows=len(reports))
        return target

    def fit_slopes(self, reports: List[ErrorReport]) -> Dict[str, float]:
        """Least-squares slope of log(err) against log(h), per error column"""
        if len(reports) < 2:
            raise ConfigurationError("a rate needs at least two levels")
        log_h = np.log([r.h for r in reports])
        slopes = {}
        for name, column in SLOPE_COLUMNS.items():
            errors = np.array([getattr(r, column) for r in reports])
            if np.any(errors <= 0.0):
                logger.warning("Skipping slope with non-positive errors", column=column)
                slopes[name] = float("nan")
                continue
            slopes[name] = float(linregress(log_h, np.log(errors)).slope)
        return slopes

    def rate_ok(
        self, slopes: Dict[str, float], expected: int, tolerance: Optional[float] = None
    ) -> Optional[bool]:
        """Energy slope within tolerance of the expected rate; None when no tolerance is given."""
        if tolerance is None:
            return None
        measured = slopes.get("energy", float("nan"))
        return bool(np.isfinite(measured) and abs(measured - expected) <= tolerance)
