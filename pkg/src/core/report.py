"""
Structured verification results.
"""
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import orjson

from config.settings import settings
from src import __version__
from src.utils.logging import verification_logger
from src.utils.metrics import metrics_collector


def _plain(value: Any) -> Any:
    """Convert numpy scalars/arrays and complex numbers to JSON-friendly values."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (complex, np.complexfloating)):
        return {'re': float(np.real(value)), 'im': float(np.imag(value))}
    if isinstance(value, np.generic):
        return value.item()
    return value


def default_provenance(**extra) -> Dict[str, Any]:
    """Seed, tolerances, grid and library version embedded in every report."""
    prov = {
        'version': __version__,
        'seed': settings.sampling.seed,
        'tolerances': settings.tolerances.model_dump(),
        'grid': settings.grid.model_dump(),
    }
    prov.update(extra)
    return prov


@dataclass
class Report:
    """Outcome of a residual check."""
    name: str
    max_residual: float
    tolerance: float
    passed: Optional[bool] = None
    mean_residual: float = 0.0
    n_nodes: int = 0
    n_excluded: int = 0
    flags: List[str] = field(default_factory=list)
    details: Dict[str, Any] = field(default_factory=dict)
    provenance: Dict[str, Any] = field(default_factory=dict)
    duration: float = 0.0

    def __post_init__(self):
        self.max_residual = float(self.max_residual)
        if self.passed is None:
            self.passed = bool(np.isfinite(self.max_residual) and self.max_residual <= self.tolerance)

    @classmethod
    def from_residuals(cls, name: str, residuals, tolerance: float, excluded: int = 0,
                       **kwargs) -> 'Report':
        """Build a report from an array of per-node residuals."""
        values = np.abs(np.asarray(residuals, dtype=float)).ravel()
        if values.size == 0:
            return cls(name=name, max_residual=0.0, tolerance=tolerance, n_nodes=0,
                       n_excluded=excluded, **kwargs)
        return cls(name=name, max_residual=float(values.max()), mean_residual=float(values.mean()),
                   tolerance=tolerance, n_nodes=int(values.size), n_excluded=excluded, **kwargs)

    def to_dict(self) -> Dict[str, Any]:
        return _plain({
            'name': self.name,
            'passed': self.passed,
            'max_residual': self.max_residual,
            'mean_residual': self.mean_residual,
            'tolerance': self.tolerance,
            'n_nodes': self.n_nodes,
            'n_excluded': self.n_excluded,
            'flags': self.flags,
            'details': self.details,
            'provenance': self.provenance,
            'duration': self.duration,
        })

    def log(self) -> 'Report':
        """Send the outcome to the check logger and the metrics registry."""
        verification_logger.log_check(self.name, self.max_residual, self.tolerance, self.passed,
                                      n_nodes=self.n_nodes, flags=self.flags)
        verification_logger.log_excluded(self.name, self.n_excluded, 'immersion/branch/boundary')
        metrics_collector.record_check({
            'name': self.name,
            'passed': self.passed,
            'max_residual': self.max_residual,
            'duration': self.duration,
            'n_excluded': self.n_excluded,
        })
        return self


class ReportBundle:
    """Ordered collection of reports produced by one command."""

    def __init__(self, command: str, provenance: Optional[Dict[str, Any]] = None):
        self.command = command
        self.reports: List[Report] = []
        self.provenance = provenance or default_provenance()
        self.started = time.time()
        self._last_add = time.perf_counter()

    def add(self, report: Report) -> Report:
        """Append a report; unless timed by the caller, its duration is the time since the previous add."""
        now = time.perf_counter()
        if not report.duration:
            report.duration = now - self._last_add
        self._last_add = now
        if not report.provenance:
            report.provenance = self.provenance
        self.reports.append(report.log())
        return report

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.reports)

    def summary(self) -> Dict[str, Any]:
        total = len(self.reports)
        passed = len([r for r in self.reports if r.passed])
        return {
            'command': self.command,
            'total_checks': total,
            'passed_checks': passed,
            'failed_checks': total - passed,
            'passed': self.passed,
            'elapsed': time.time() - self.started,
        }

    def to_dict(self) -> Dict[str, Any]:
        return _plain({
            'summary': self.summary(),
            'provenance': self.provenance,
            'reports': [r.to_dict() for r in self.reports],
        })

    def write_json(self, path: str):
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_bytes(orjson.dumps(self.to_dict(), option=orjson.OPT_INDENT_2))
