"""
First-order invariants of CR-holomorphic curves and their classification.

Along a CR-holomorphic curve with holomorphic coordinate z,

    (theta1, theta3, kappa21, kappa23) = (A1, A2, B1, B2) dz

and a change of adapted coframe by U in U(2) acts as A -> U A,
B -> det(conj U) conj(U) B. The quantities a = |A|^2, b = |B|^2 and
|B^T A| do not depend on that choice.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog

from config.settings import settings
from src.core.errors import GaugeDiscontinuityError, InputError, NotCRError, UnitaryError
from src.core.report import Report
from src.frames.su3 import coframe_from_connection
from src.grassmann.cr import cr_residual
from src.lie.frames import CurveLift, maurer_cartan

logger = structlog.get_logger(__name__)

BINORMAL_LIFT = 'binormal-lift'
NULL_TORSION_BINORMAL = 'null-torsion-binormal'
FIBER_CP2 = 'fiber-CP2'
GENERIC = 'generic'
DEGENERATE = 'degenerate-O2-branch'
CLASSIFICATIONS = (BINORMAL_LIFT, NULL_TORSION_BINORMAL, FIBER_CP2, GENERIC, DEGENERATE)


@dataclass
class ABData:
    """A and B on a grid: arrays of shape (nx, ny, 2), complex."""
    A: np.ndarray
    B: np.ndarray
    step: Tuple[float, float] = (1.0, 1.0)
    cr_fit_residual: float = 0.0

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=complex)
        self.B = np.asarray(self.B, dtype=complex)
        if self.A.shape != self.B.shape or self.A.shape[-1] != 2:
            raise InputError(f"A and B must share a (..., 2) shape, got {self.A.shape} and {self.B.shape}")


@dataclass
class CRInvariants:
    """Pointwise a, b, |B^T A| and the curve's classification."""
    a: np.ndarray
    b: np.ndarray
    rho_abs: np.ndarray
    classification: str
    threshold: float
    flags: List[str] = field(default_factory=list)

    @property
    def a_max(self) -> float:
        return float(np.max(self.a))

    @property
    def b_max(self) -> float:
        return float(np.max(self.b))

    @property
    def rho_max(self) -> float:
        return float(np.max(self.rho_abs))

    def to_dict(self) -> Dict:
        return {
            'classification': self.classification,
            'threshold': self.threshold,
            'flags': self.flags,
            'a_max': self.a_max,
            'b_max': self.b_max,
            'rho_abs_max': self.rho_max,
            'nodes': [{'a': float(a), 'b': float(b), 'rho_abs': float(r)}
                      for a, b, r in zip(self.a.ravel(), self.b.ravel(), self.rho_abs.ravel())],
        }


def extract_AB(lift: CurveLift, node: Optional[Sequence[int]] = None) -> ABData:
    """Read A, B off the d/dx components; z = x + iy must be holomorphic on the curve.

    Without `node` the whole interior grid is used.
    """
    if lift.dim != 2:
        raise InputError("extract_AB needs a 2D lift")
    cr = cr_residual(lift)
    if not cr.passed:
        raise NotCRError(f"lift is not CR-holomorphic (residual {cr.max_residual:.3e})")

    nodes = [tuple(node)] if node is not None else lift.interior_nodes()
    xs = sorted({n[0] for n in nodes})
    ys = sorted({n[1] for n in nodes})
    shape = (len(xs), len(ys))
    forms = np.zeros(shape + (2, 4), dtype=complex)
    for n in nodes:
        theta, kappa = coframe_from_connection(maurer_cartan(lift, n))
        forms[xs.index(n[0]), ys.index(n[1])] = np.stack(
            [theta[:, 0], theta[:, 2], kappa[:, 1, 0], kappa[:, 1, 2]], axis=-1)

    fx, fy = forms[..., 0, :], forms[..., 1, :]
    scale = max(1.0, float(np.max(np.abs(fx))))
    if np.max(np.abs(forms)) < settings.tolerances.branch_point:
        raise NotCRError("all invariant forms vanish; the curve is not immersed")
    fit = float(np.max(np.abs(fy - 1j * fx))) / scale
    if fit > settings.tolerances.adapted:
        raise NotCRError(f"forms are not proportional to dz (residual {fit:.3e})")
    return ABData(A=fx[..., :2], B=fx[..., 2:], step=(lift.step[0], lift.step[1]), cr_fit_residual=fit)


def _check_unitary(U: np.ndarray):
    U = np.asarray(U, dtype=complex)
    if U.shape[-2:] != (2, 2):
        raise UnitaryError(f"gauge must be 2x2, got {U.shape}")
    defect = np.max(np.abs(np.conj(np.swapaxes(U, -1, -2)) @ U - np.eye(2)))
    if defect > settings.tolerances.gauge_unitarity:
        raise UnitaryError(f"gauge is not unitary (residual {defect:.3e})")
    return U


def gauge_transform(ab: ABData, U: np.ndarray) -> ABData:
    """A -> U A, B -> det(conj U) conj(U) B; U constant or one matrix per node."""
    U = _check_unitary(U)
    Ub = np.conj(U)
    det = np.linalg.det(Ub)
    A = np.einsum('...ij,...j->...i', U, ab.A)
    B = det[..., None] * np.einsum('...ij,...j->...i', Ub, ab.B)
    return ABData(A=A, B=B, step=ab.step, cr_fit_residual=ab.cr_fit_residual)


def invariants_of(ab: ABData, threshold: Optional[float] = None) -> CRInvariants:
    """a, b, |B^T A| and the classification by vanishing pattern.

    Order of tests: everything small, a small, b small, |B^T A| small.
    """
    a = np.sum(np.abs(ab.A) ** 2, axis=-1)
    b = np.sum(np.abs(ab.B) ** 2, axis=-1)
    rho = np.abs(np.sum(ab.B * ab.A, axis=-1))
    rel = settings.tolerances.classification if threshold is None else threshold
    tau = rel * max(float(np.max(a)), float(np.max(b)), 1.0)
    a_small, b_small, rho_small = np.max(a) < tau, np.max(b) < tau, np.max(rho) < tau
    if a_small and b_small:
        label = DEGENERATE
    elif a_small:
        label = FIBER_CP2
    elif b_small:
        label = NULL_TORSION_BINORMAL
    elif rho_small:
        label = BINORMAL_LIFT
    else:
        label = GENERIC

    flags = []
    for name, values in (('a', a), ('b', b), ('rho_abs', rho)):
        below = np.mean(values < tau)
        if 0.1 <= below < 1.0:
            # holomorphic quantities vanishing on an open set vanish identically
            flags.append(f'partial_vanishing:{name}')
    inv = CRInvariants(a=a, b=b, rho_abs=rho, classification=label, threshold=tau, flags=flags)
    logger.info("curve classified", classification=label, threshold=tau,
                a_max=inv.a_max, b_max=inv.b_max, rho_max=inv.rho_max)
    return inv


def _check_phase_continuity(values: np.ndarray) -> None:
    phase = np.angle(values)
    jumps = max(np.max(np.abs(np.angle(np.exp(1j * np.diff(phase, axis=ax)))), initial=0.0)
                for ax in range(2))
    if jumps > settings.tolerances.phase_jump:
        raise GaugeDiscontinuityError(f"phase jumps by {jumps:.3f} between neighbouring nodes")


def holomorphy_residual(ab: ABData) -> float:
    """Max discrete d-bar residual |(d/dx + i d/dy) f| / (2|f|) of A_k, B_k over interior nodes.

    Central differences in x and y. A unitary frame makes A, B holomorphic only up to
    a positive weight w, which contributes |d-bar log w|; that term shrinks with the
    distance from the grid centre where the frame is normalised. Components below
    the classification threshold are skipped. Phase jumps above the configured
    limit between neighbours are rejected as a gauge discontinuity.
    """
    hx, hy = ab.step
    tau = settings.tolerances.classification * max(1.0, float(np.max(np.abs(ab.A), initial=0.0)),
                                                    float(np.max(np.abs(ab.B), initial=0.0)))
    worst = 0.0
    for values in (ab.A[..., 0], ab.A[..., 1], ab.B[..., 0], ab.B[..., 1]):
        if values.shape[0] < 3 or values.shape[1] < 3 or np.min(np.abs(values)) < tau:
            continue
        _check_phase_continuity(values)
        dx_ = (values[2:, 1:-1] - values[:-2, 1:-1]) / (2 * hx)
        dy_ = (values[1:-1, 2:] - values[1:-1, :-2]) / (2 * hy)
        dbar = 0.5 * (dx_ + 1j * dy_)
        worst = max(worst, float(np.max(np.abs(dbar) / np.abs(values[1:-1, 1:-1]))))
    return worst


def classification_report(inv: CRInvariants, ab: Optional[ABData] = None) -> Report:
    report = Report(name='classification', max_residual=0.0, tolerance=inv.threshold, passed=True,
                    n_nodes=int(inv.a.size), flags=list(inv.flags), details=inv.to_dict())
    if ab is not None:
        report.details['cr_fit_residual'] = ab.cr_fit_residual
    return report


def ab_to_dict(ab: ABData) -> Dict:
    return {
        'A_re': ab.A.real.tolist(), 'A_im': ab.A.imag.tolist(),
        'B_re': ab.B.real.tolist(), 'B_im': ab.B.imag.tolist(),
        'step': list(ab.step), 'cr_fit_residual': ab.cr_fit_residual,
    }


def ab_from_dict(data: Dict) -> ABData:
    try:
        A = np.asarray(data['A_re'], dtype=float) + 1j * np.asarray(data['A_im'], dtype=float)
        B = np.asarray(data['B_re'], dtype=float) + 1j * np.asarray(data['B_im'], dtype=float)
        return ABData(A=A, B=B, step=tuple(data.get('step', (1.0, 1.0))),
                      cr_fit_residual=float(data.get('cr_fit_residual', 0.0)))
    except (KeyError, ValueError, TypeError) as e:
        raise InputError(f"malformed A/B data: {e}") from e
