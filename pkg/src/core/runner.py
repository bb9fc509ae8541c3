"""
Command orchestration for calib7: verification, invariants and profile output.
"""
from pathlib import Path
from typing import List, Literal, Optional, Tuple

import numpy as np
import orjson
import structlog
from pydantic import BaseModel, field_validator, model_validator
from rich.console import Console
from rich.table import Table

from config.settings import settings
from src.core.errors import CheckFailure, InputError
from src.core.report import Report, ReportBundle, default_provenance
from src.families.constructions import (binormal_lift, bundle_framing_residual, centered_axis, degree_one_line,
                                        fiber_curve, hl_fourfold, hl_implicit_residual, random_lift,
                                        round_s2_connection, round_s2_frame_field, surface_bundle, t_plane_lift)
from src.families.profile import SQRT5_2, BRANCHES, ProfileCurve, branch_of, write_asymptotes
from src.grassmann.cr import OrientedTwoPlane, cr_residual, gamma_construction, project_p, ruling_ideal_residual
from src.grassmann.fourfold import Fourfold, coassociativity_residual, node_residuals
from src.invariants.classifier import (ab_from_dict, classification_report, extract_AB, holomorphy_residual,
                                       invariants_of)
from src.lie.frames import CurveLift
from src.utils.logging import verification_logger
from src.utils.metrics import metrics_collector

logger = structlog.get_logger(__name__)
console = Console()

FAMILIES = ('hl', 'bundle', 'fiber', 't-plane')


class RunConfig(BaseModel):
    """Validated command-line configuration."""
    command: Literal['verify', 'invariants', 'profile']
    family: Optional[Literal['hl', 'bundle', 'fiber', 't-plane']] = None
    input: Optional[str] = None
    k: float = 1.0
    grid: Optional[Tuple[int, ...]] = None
    t_range: Optional[Tuple[float, float]] = None
    seed: int = settings.sampling.seed
    tol: Optional[float] = None
    fd_step: Optional[float] = None
    out: Optional[str] = None
    format: Literal['json', 'csv', 'svg'] = 'json'

    @field_validator('tol', 'fd_step')
    @classmethod
    def _positive(cls, value):
        if value is not None and value <= 0:
            raise ValueError("must be positive")
        return value

    @field_validator('grid')
    @classmethod
    def _grid(cls, value):
        if value is not None and (len(value) not in (1, 2) or min(value) < settings.grid.min_nodes):
            raise ValueError(f"grid must be N or N,M with at least {settings.grid.min_nodes} nodes")
        return value

    @field_validator('t_range')
    @classmethod
    def _t_range(cls, value):
        if value is not None:
            lo, hi = value
            if not 0 < lo < hi:
                raise ValueError("t-range must satisfy 0 < A < B")
            if branch_of(lo) != branch_of(hi):
                raise ValueError("t-range must stay inside one branch")
        return value

    @model_validator(mode='after')
    def _source(self):
        if self.command in ('verify', 'invariants') and not (self.family or self.input):
            raise ValueError(f"{self.command} needs --family or --input")
        if self.k < 0:
            raise ValueError("k must be nonnegative")
        return self


class VerificationRunner:
    """Builds the requested objects, runs the checks and writes the outputs."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.bundle = ReportBundle(config.command, default_provenance(seed=config.seed))
        self.samples: Optional[Fourfold] = None
        logger.info("runner initialized", command=config.command, family=config.family,
                    input=config.input, k=config.k)

    def run(self) -> int:
        handler = {
            'verify': self.cmd_verify,
            'invariants': self.cmd_invariants,
            'profile': self.cmd_profile,
        }[self.config.command]
        try:
            return handler()
        finally:
            metrics_collector.dump(settings.runtime.metrics_path)

    # ------------------------------------------------------------------ helpers

    def _axes(self):
        grid = self.config.grid or (settings.grid.base_nodes,)
        nx, ny = (grid[0], grid[-1])
        step = self.config.fd_step or settings.grid.base_spacing
        return centered_axis(nx, step), centered_axis(ny, step)

    def _branches(self) -> List[str]:
        if self.config.t_range:
            return [branch_of(self.config.t_range[0])]
        return list(BRANCHES)

    def _t_grid(self, branch: str):
        ranges = {branch: self.config.t_range} if self.config.t_range else None
        return ProfileCurve(self.config.k, ranges).t_grid(branch)

    def _out_path(self, default_name: str) -> str:
        return self.config.out or str(Path(settings.runtime.output_dir) / default_name)

    def _check(self, report: Report, override: bool = False) -> Report:
        """Apply --tol to the primary residual checks."""
        if override and self.config.tol is not None:
            report.tolerance = self.config.tol
            report.passed = bool(np.isfinite(report.max_residual) and report.max_residual <= self.config.tol)
        return self.bundle.add(report)

    def _coassociative(self, fourfold: Fourfold) -> Report:
        if self.samples is None:
            self.samples = fourfold
        return self._check(coassociativity_residual(fourfold), override=True)

    def _load_lift(self) -> CurveLift:
        return CurveLift.read_json(self.config.input)

    # ------------------------------------------------------------------ verify

    def cmd_verify(self) -> int:
        """Run the checks for a built-in family or an input lift."""
        family = self.config.family
        if self.config.input:
            self._verify_lift(self._load_lift())
        elif family == 'hl':
            self._verify_hl()
        elif family == 'bundle':
            self._verify_bundle()
        elif family == 'fiber':
            lift = fiber_curve(np.eye(7)[:, 4], degree_one_line, *self._axes())
            self._verify_lift(lift)
            p_values = [np.linalg.norm(project_p(OrientedTwoPlane(lift.frames[n][:, 0], lift.frames[n][:, 1]))
                                       - np.eye(7)[:, 4]) for n in lift.nodes()]
            self._check(Report.from_residuals('fiber_projection', p_values, settings.tolerances.closed_form))
        elif family == 't-plane':
            self._verify_lift(t_plane_lift(*self._axes()))
        return self._finish('verify.json')

    def _verify_lift(self, lift: CurveLift, cr: bool = True):
        self._coassociative(gamma_construction(lift))
        self._check(ruling_ideal_residual(lift))
        if cr:
            self._check(cr_residual(lift))

    def _verify_hl(self):
        k = self.config.k
        if k == 0:
            raise InputError("the Harvey-Lawson family needs k > 0; use --family bundle --k 0 for the cone")
        for branch in self._branches():
            fourfold = hl_fourfold(k, self._t_grid(branch), branch)
            self._coassociative(fourfold)
            self._check(Report.from_residuals(f'hl_implicit:{branch}',
                                              hl_implicit_residual(fourfold.points, k) / max(1.0, k ** 5),
                                              1e-8))
            if self.config.fd_step:
                euler = (np.linspace(0, 2 * np.pi, 3, endpoint=False), np.linspace(0.2, 1.3, 3),
                         np.linspace(0, 2 * np.pi, 3, endpoint=False))
                fd = hl_fourfold(k, self._t_grid(branch)[::8], branch, euler, tangent_step=self.config.fd_step)
                self._check(coassociativity_residual(fd))

    def _verify_bundle(self):
        k = self.config.k
        base = round_s2_frame_field(*self._axes())
        angles = np.linspace(0, 2 * np.pi, settings.grid.angle_samples, endpoint=False)
        if k > 0:
            for branch in self._branches():
                t_grid = self._t_grid(branch)
                fourfold = surface_bundle(base, k, t_grid, angles, branch=branch, connection=round_s2_connection)
                self._coassociative(fourfold)
                self._check(Report.from_residuals(f'bundle_implicit:{branch}',
                                                  hl_implicit_residual(fourfold.points, k) / max(1.0, k ** 5),
                                                  1e-8))
                framing = bundle_framing_residual(base, k, t_grid, angles)
                self._check(Report(name=f'bundle_framing:{branch}', max_residual=framing,
                                   tolerance=settings.tolerances.closed_form))
            return
        cone = surface_bundle(base, 0.0, angle_grid=angles, piece='cone', connection=round_s2_connection)
        self._coassociative(cone)
        r4 = np.linalg.norm(cone.points[:, :4], axis=1)
        s = np.linalg.norm(cone.points[:, 4:], axis=1)
        self._check(Report.from_residuals('cone_relation', s - SQRT5_2 * r4, settings.tolerances.closed_form))
        plane = surface_bundle(base, 0.0, angle_grid=angles, piece='plane', connection=round_s2_connection)
        self._coassociative(plane)
        self._check(ruling_ideal_residual(binormal_lift(base)))

    # -------------------------------------------------------------- invariants

    def cmd_invariants(self) -> int:
        """Classify a CR-holomorphic curve by its first-order invariants."""
        if self.config.input:
            data = orjson.loads(Path(self.config.input).read_bytes()) if Path(self.config.input).exists() else None
            if data is None:
                raise InputError(f"cannot read {self.config.input}")
            ab = ab_from_dict(data) if 'A_re' in data else extract_AB(CurveLift.from_dict(data).validate(1e-8))
        elif self.config.family == 'fiber':
            ab = extract_AB(fiber_curve(np.eye(7)[:, 4], degree_one_line, *self._axes()))
        elif self.config.family == 't-plane':
            raise InputError("invariants are not tabulated for the t-plane family; use fiber, bundle or --input")
        else:
            ab = extract_AB(binormal_lift(round_s2_frame_field(*self._axes())))
        inv = invariants_of(ab)
        report = classification_report(inv, ab)
        report.details['holomorphy_residual'] = holomorphy_residual(ab)
        self.bundle.add(report)
        console.print(f"classification: [bold]{inv.classification}[/bold] (threshold {inv.threshold:.2e})")
        return self._finish('invariants.json')

    # ----------------------------------------------------------------- profile

    def cmd_profile(self) -> int:
        """Write the profile curve (or its k = 0 asymptotes) as CSV or SVG."""
        fmt = 'svg' if self.config.format == 'svg' else 'csv'
        path = self._out_path(f'profile.{fmt}')
        n = self.config.grid[0] if self.config.grid else None
        if self.config.k == 0:
            write_asymptotes(path, fmt, n)
            console.print(f"k = 0: asymptotes written to {path}")
            return 0
        ranges = {branch_of(self.config.t_range[0]): self.config.t_range} if self.config.t_range else None
        curve = ProfileCurve(self.config.k, ranges)
        if fmt == 'svg':
            curve.to_svg(path, n)
        else:
            df = curve.to_csv(path, n)
            worst = float(df['residual'].abs().max())
            verification_logger.log_check('profile_implicit', worst, settings.tolerances.closed_form,
                                          worst <= settings.tolerances.closed_form)
        console.print(f"profile written to {path}")
        return 0

    # ------------------------------------------------------------------ output

    def _finish(self, default_name: str) -> int:
        path = self._out_path(default_name)
        if self.config.format == 'csv' and self.samples is not None:
            restriction, _, _ = node_residuals(self.samples)
            self.samples.to_csv(path if path.endswith('.csv') else path + '.csv', restriction)
            path = str(Path(path).with_suffix('.json'))
        self.bundle.write_json(path)
        self._print_summary(path)
        summary = self.bundle.summary()
        verification_logger.log_summary(summary)
        if not summary['passed']:
            raise CheckFailure(f"{summary['failed_checks']} of {summary['total_checks']} checks failed; "
                               f"report in {path}")
        return 0

    def _print_summary(self, path: str):
        table = Table(title=f"calib7 {self.config.command}")
        table.add_column("check")
        table.add_column("max residual", justify="right")
        table.add_column("tolerance", justify="right")
        table.add_column("excluded", justify="right")
        table.add_column("result")
        for r in self.bundle.reports:
            table.add_row(r.name, f"{r.max_residual:.3e}", f"{r.tolerance:.1e}", str(r.n_excluded),
                          "[green]pass[/green]" if r.passed else "[red]FAIL[/red]")
        console.print(table)
        console.print(f"report written to {path}")


def random_lift_fixture(path: str, seed: int):
    """Write a generic (non-CR) lift as JSON."""
    random_lift(seed).write_json(path)
