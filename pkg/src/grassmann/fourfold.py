"""
Sampled 4-folds in R^7 and the coassociativity verifier.

A 4-fold is coassociative iff phi restricts to zero on it; *phi on an oriented
orthonormal tangent frame is then +-1.
"""
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
import structlog

from config.settings import settings
from src.core.errors import InputError
from src.core.report import Report
from src.forms.exterior import PHI, STAR_PHI, evaluate_batch

logger = structlog.get_logger(__name__)

# analytic tangents carry only round-off plus profile evaluation error
ANALYTIC_TOLERANCE = 1e-8
COORD_NAMES = ('r1', 'r2', 'sigma1', 'sigma2')


@dataclass
class Fourfold:
    """Points (N, 7), tangent columns (N, 7, 4) and parameters (N, 4) of a sampled 4-fold."""
    points: np.ndarray
    tangents: np.ndarray
    coords: np.ndarray
    analytic: bool = False
    label: str = ''
    coord_names: tuple = COORD_NAMES
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.tangents = np.asarray(self.tangents, dtype=float)
        self.coords = np.asarray(self.coords, dtype=float)
        n = self.points.shape[0]
        if self.points.shape != (n, 7) or self.tangents.shape != (n, 7, 4) or self.coords.shape[0] != n:
            raise InputError(f"inconsistent fourfold sample shapes {self.points.shape}, "
                             f"{self.tangents.shape}, {self.coords.shape}")

    def __len__(self) -> int:
        return self.points.shape[0]

    def to_frame(self, residuals: Optional[np.ndarray] = None) -> pd.DataFrame:
        df = pd.DataFrame(self.coords, columns=list(self.coord_names))
        for i in range(7):
            df[f'x{i + 1}'] = self.points[:, i]
        df['residual'] = np.nan if residuals is None else residuals
        return df

    def to_csv(self, path: str, residuals: Optional[np.ndarray] = None):
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        self.to_frame(residuals).to_csv(path, index=False)
        logger.info("fourfold samples written", path=path, rows=len(self))


def node_residuals(m: Fourfold):
    """phi restriction, *phi calibration value and immersion mask per sample."""
    sv = np.linalg.svd(m.tangents, compute_uv=False)
    immersed = sv[:, -1] > settings.tolerances.immersion_sv
    q, r = np.linalg.qr(m.tangents)
    # orientation of the parameter frame is kept: R has positive diagonal after the sign fix
    q = q * np.sign(np.diagonal(r, axis1=-2, axis2=-1))[:, None, :]
    phi_values = np.stack([evaluate_batch(PHI, q[:, :, list(t)]) for t in combinations(range(4), 3)], axis=-1)
    restriction = np.max(np.abs(phi_values), axis=-1)
    calibration = evaluate_batch(STAR_PHI, q)
    return restriction, calibration, immersed


def coassociativity_residual(m: Fourfold, tolerance: Optional[float] = None) -> Report:
    """max |phi| on orthonormalized tangent triples over immersed samples."""
    if tolerance is None:
        tolerance = ANALYTIC_TOLERANCE if m.analytic else settings.tolerances.finite_difference
    restriction, calibration, immersed = node_residuals(m)
    excluded = int(np.sum(~immersed))
    report = Report.from_residuals(f'coassociative{":" + m.label if m.label else ""}',
                                   restriction[immersed], tolerance, excluded=excluded)
    cal = calibration[immersed]
    if cal.size:
        report.details.update({
            'calibration_min': float(cal.min()),
            'calibration_max': float(cal.max()),
            'calibration_defect': float(np.max(np.abs(np.abs(cal) - 1.0))),
        })
        if cal.min() < 0:
            report.flags.append('orientation_reversed')
    else:
        report.flags.append('no_immersed_samples')
        report.passed = False
    report.details['tangents'] = 'analytic' if m.analytic else 'finite-difference'
    return report
