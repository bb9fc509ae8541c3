"""
The profile curve w (w^2 - 5/4 z^2)^2 = k^5 in cylindrical coordinates (z, w).

Parametrization: z = k t^(-1/5) (t^2 - 5/4)^(-2/5), w = t z. Fractional powers
of negative bases use the real fifth root.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd
import structlog

from config.settings import settings
from src.core.errors import InputError, SingularParameterError

logger = structlog.get_logger(__name__)

SQRT5_2 = np.sqrt(5.0) / 2.0
SINGULAR_TOL = 1e-8

# t-intervals of the two connected components (t > 0 keeps z > 0)
BRANCHES: Dict[str, Tuple[float, float]] = {
    'outer': (SQRT5_2, np.inf),
    'inner': (0.0, SQRT5_2),
}
DEFAULT_T_RANGES: Dict[str, Tuple[float, float]] = {
    'outer': (1.2, 4.0),
    'inner': (0.3, 1.0),
}


def real_root5(x):
    return np.sign(x) * np.abs(x) ** 0.2


def _check_t(t: float):
    if abs(t) < SINGULAR_TOL:
        raise SingularParameterError(t, "t = 0 (the w-axis)")
    if abs(abs(t) - SQRT5_2) < SINGULAR_TOL:
        raise SingularParameterError(t, f"asymptote w = {'+' if t > 0 else '-'}(sqrt5/2) z")


def profile_point(t: float, k: float) -> Tuple[float, float]:
    """(z, w) on the profile curve."""
    if k <= 0:
        raise InputError(f"k must be positive, got {k}")
    _check_t(t)
    s = t * t - 1.25
    z = k / (real_root5(t) * real_root5(s) ** 2)
    return float(z), float(t * z)


def profile_derivative(t: float, k: float) -> Tuple[float, float]:
    """(dz/dt, dw/dt)."""
    z, _ = profile_point(t, k)
    s = t * t - 1.25
    dz = z * (-1.0 / (5.0 * t) - 4.0 * t / (5.0 * s))
    return float(dz), float(z + t * dz)


def implicit_residual(z: float, w: float, k: float) -> float:
    return float(w * (w * w - 1.25 * z * z) ** 2 - k ** 5)


def branch_of(t: float) -> str:
    for name, (lo, hi) in BRANCHES.items():
        if lo < t < hi:
            return name
    raise InputError(f"t = {t} lies on no stored branch (t must be positive)")


@dataclass
class ProfileCurve:
    """Samples of the profile curve on the two branches."""
    k: float
    t_ranges: Optional[Dict[str, Tuple[float, float]]] = None

    def __post_init__(self):
        if self.k <= 0:
            raise InputError(f"k must be positive, got {self.k}")
        self.t_ranges = dict(self.t_ranges or DEFAULT_T_RANGES)
        for name, (lo, hi) in self.t_ranges.items():
            blo, bhi = BRANCHES[name]
            if not (blo < lo < hi < bhi):
                raise InputError(f"t-range {lo, hi} leaves the {name} branch {blo, bhi}")

    def t_grid(self, branch: str, n: Optional[int] = None) -> np.ndarray:
        lo, hi = self.t_ranges[branch]
        return np.linspace(lo, hi, n or settings.grid.t_samples)

    def sample(self, n: Optional[int] = None) -> pd.DataFrame:
        rows = []
        for branch in self.t_ranges:
            for t in self.t_grid(branch, n):
                z, w = profile_point(t, self.k)
                rows.append({'t': t, 'z': z, 'w': w, 'branch': branch,
                             'residual': implicit_residual(z, w, self.k)})
        return pd.DataFrame(rows)

    def to_csv(self, path: str, n: Optional[int] = None) -> pd.DataFrame:
        df = self.sample(n)
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        df.to_csv(path, index=False)
        logger.info("profile written", path=path, rows=len(df))
        return df

    def to_svg(self, path: str, n: Optional[int] = None):
        """Both branches in the (z, w) plane with the asymptotes w = +-(sqrt5/2) z."""
        import matplotlib
        matplotlib.use('Agg')
        import matplotlib.pyplot as plt

        df = self.sample(n)
        fig, ax = plt.subplots(figsize=(5, 5))
        for branch, group in df.groupby('branch'):
            ax.plot(group['z'], group['w'], label=branch)
        zmax = float(df['z'].max())
        zs = np.linspace(0, zmax, 2)
        ax.plot(zs, SQRT5_2 * zs, 'k--', linewidth=0.8, label='w = (sqrt5/2) z')
        ax.plot(zs, -SQRT5_2 * zs, 'k:', linewidth=0.8)
        ax.set_xlabel('z')
        ax.set_ylabel('w')
        ax.set_title(f'profile curve, k = {self.k:g}')
        ax.legend()
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, format='svg')
        plt.close(fig)
        logger.info("profile plot written", path=path)


def asymptote_frame(n: Optional[int] = None, z_max: float = 2.0) -> pd.DataFrame:
    """The k = 0 limit: only the lines w = +-(sqrt5/2) z remain."""
    zs = np.linspace(0.0, z_max, n or settings.grid.t_samples)
    rows = [{'t': sign * SQRT5_2, 'z': z, 'w': sign * SQRT5_2 * z,
             'branch': 'asymptote+' if sign > 0 else 'asymptote-'}
            for sign in (1.0, -1.0) for z in zs]
    return pd.DataFrame(rows)


def write_asymptotes(path: str, fmt: str = 'csv', n: Optional[int] = None):
    df = asymptote_frame(n)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    if fmt == 'csv':
        df.to_csv(path, index=False)
    else:
        import matplotlib
        matplotlib.use('Agg')
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(5, 5))
        for branch, group in df.groupby('branch'):
            ax.plot(group['z'], group['w'], 'k--', linewidth=0.8, label=branch)
        ax.set_xlabel('z')
        ax.set_ylabel('w')
        ax.set_title('profile curve, k = 0')
        fig.savefig(path, format='svg')
        plt.close(fig)
    logger.info("degenerate profile written", path=path, fmt=fmt)
