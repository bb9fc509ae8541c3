"""
The G2-invariant CR structure on the oriented Grassmannian of 2-planes in R^7.

Along a lift into G2 the plane is e1 ^ e2. With w_ij = <e_i, de_j>:

    zeta3 = w31 + i w41    zeta4 = w32 + i w42
    zeta6 = w61 - i w71    zeta7 = w62 - i w72
    Phi   = w63 + i w73

A curve of planes is CR-holomorphic when w51 = w52 = 0 and the zeta span a
single complex line along it. The ruled 4-fold r1 e1 + r2 e2 is then a
coassociative cone.
"""
from dataclasses import dataclass
from itertools import combinations
from typing import Optional, Sequence

import numpy as np
import structlog

from config.settings import settings
from src.core.errors import InputError
from src.core.report import Report
from src.forms.exterior import cross, phi
from src.frames.su3 import coframe_from_connection
from src.grassmann.fourfold import Fourfold
from src.lie.frames import CurveLift, maurer_cartan

logger = structlog.get_logger(__name__)


@dataclass(frozen=True)
class OrientedTwoPlane:
    """Oriented plane represented by an orthonormal pair."""
    v1: np.ndarray
    v2: np.ndarray

    def __post_init__(self):
        v1, v2 = np.asarray(self.v1, dtype=float), np.asarray(self.v2, dtype=float)
        tol = settings.tolerances.closed_form
        if abs(v1 @ v1 - 1) > tol or abs(v2 @ v2 - 1) > tol or abs(v1 @ v2) > tol:
            raise InputError("plane representative is not an orthonormal pair")
        object.__setattr__(self, 'v1', v1)
        object.__setattr__(self, 'v2', v2)

    def rotated(self, angle: float) -> 'OrientedTwoPlane':
        c, s = np.cos(angle), np.sin(angle)
        return OrientedTwoPlane(c * self.v1 + s * self.v2, -s * self.v1 + c * self.v2)

    def transformed(self, g: np.ndarray) -> 'OrientedTwoPlane':
        return OrientedTwoPlane(g @ self.v1, g @ self.v2)


def project_p(plane: OrientedTwoPlane) -> np.ndarray:
    """p(v1 ^ v2) = v2 . v1."""
    return cross(plane.v2, plane.v1)


@dataclass
class CRCoframe:
    """zeta (dim, 4) in the order zeta3, zeta4, zeta6, zeta7; w51, w52, Phi per direction."""
    zeta: np.ndarray
    w51: np.ndarray
    w52: np.ndarray
    Phi: np.ndarray


def cr_coframe(omega: np.ndarray) -> CRCoframe:
    w = lambda i, j: omega[..., i - 1, j - 1]
    zeta = np.stack([w(3, 1) + 1j * w(4, 1), w(3, 2) + 1j * w(4, 2),
                     w(6, 1) - 1j * w(7, 1), w(6, 2) - 1j * w(7, 2)], axis=-1)
    return CRCoframe(zeta=zeta, w51=w(5, 1), w52=w(5, 2), Phi=w(6, 3) + 1j * w(7, 3))


def _two_form(a, b):
    """(a ^ b)(dx, dy) for 1-forms given as (2, ...) arrays of components."""
    return a[0] * b[1] - a[1] * b[0]


def _pair_form(e, da, db):
    """phi(e, da, db) as a 2-form: phi(e, da_x, db_y) - phi(e, da_y, db_x)."""
    return phi(e, da[0], db[1]) - phi(e, da[1], db[0])


def _require_surface(lift: CurveLift):
    if lift.dim != 2:
        raise InputError("operation needs a 2D lift")


def gamma_construction(curve: CurveLift, r_grid: Optional[Sequence[float]] = None) -> Fourfold:
    """Sample r1 e1 + r2 e2 over interior nodes of the curve and the (r1, r2) grid.

    r-tangents are exact; curve tangents use the Maurer-Cartan form of the lift.
    """
    _require_surface(curve)
    r_grid = settings.grid.r_grid if r_grid is None else r_grid
    points, tangents, coords = [], [], []
    for node in curve.interior_nodes():
        frame = curve.frames[node]
        omega = maurer_cartan(curve, node)
        e1, e2 = frame[:, 0], frame[:, 1]
        de = frame @ omega  # de[a][:, i] = d e_(i+1) along axis a
        sigma = curve.param_at(node)
        for r1 in r_grid:
            for r2 in r_grid:
                if r1 == 0 and r2 == 0:
                    continue
                points.append(r1 * e1 + r2 * e2)
                tangents.append(np.column_stack([e1, e2,
                                                 r1 * de[0][:, 0] + r2 * de[0][:, 1],
                                                 r1 * de[1][:, 0] + r2 * de[1][:, 1]]))
                coords.append([r1, r2, sigma[0], sigma[1]])
    logger.debug("gamma construction sampled", samples=len(points))
    return Fourfold(points=np.array(points).reshape(-1, 7), tangents=np.array(tangents).reshape(-1, 7, 4),
                    coords=np.array(coords).reshape(-1, 4), analytic=False, label='gamma')


def _node_forms(lift: CurveLift, node):
    frame = lift.frames[node]
    omega = maurer_cartan(lift, node)
    de = np.array([frame @ omega[a] for a in range(2)])  # (axis, 7, 7)
    return frame, omega, de


def ruling_ideal_values(lift: CurveLift, node) -> np.ndarray:
    """-w51, w52 on both directions followed by the six 2-forms <de_i, de_j . e_k>."""
    frame, omega, de = _node_forms(lift, node)
    e = [frame[:, 0], frame[:, 1]]
    d = [de[:, :, 0], de[:, :, 1]]
    values = list(-omega[:, 4, 0]) + list(omega[:, 4, 1])
    for i, j in ((0, 0), (0, 1), (1, 1)):
        for k in range(2):
            values.append(phi(e[k], d[i][0], d[j][1]) + phi(e[k], d[j][0], d[i][1]))
    return np.array(values)


def ruling_ideal_residual(lift: CurveLift) -> Report:
    _require_surface(lift)
    values = [np.max(np.abs(ruling_ideal_values(lift, node))) for node in lift.interior_nodes()]
    return Report.from_residuals('ruling_ideal', values, settings.tolerances.finite_difference)


def cr_residual(lift: CurveLift) -> Report:
    """w51, w52 and all 2x2 minors of [zeta(dx), zeta(dy)]."""
    _require_surface(lift)
    one_forms, minors, normal_part = [], [], []
    for node in lift.interior_nodes():
        cr = cr_coframe(maurer_cartan(lift, node))
        one_forms.append(max(np.max(np.abs(cr.w51)), np.max(np.abs(cr.w52))))
        zx, zy = cr.zeta[0], cr.zeta[1]
        minors.append(max(abs(zx[i] * zy[j] - zx[j] * zy[i]) for i, j in combinations(range(4), 2)))
        normal_part.append(np.max(np.abs(cr.zeta[:, 2:])))
    tol = settings.tolerances.finite_difference
    report = Report.from_residuals('cr_holomorphic', np.maximum(one_forms, minors), tol)
    report.details.update({
        'one_form_residual': float(max(one_forms, default=0.0)),
        'minor_residual': float(max(minors, default=0.0)),
    })
    if normal_part and max(normal_part) < tol:
        report.flags.append('o2_symmetric_branch')
    return report


def upsilon_values(lift: CurveLift, node):
    """Both sides of the six Upsilon identities plus w12^w51, w12^w52 at one node."""
    frame, omega, de = _node_forms(lift, node)
    cr = cr_coframe(omega)
    z3, z4, z6, z7 = (cr.zeta[:, k] for k in range(4))
    u12 = _two_form(z6, z3)
    u34 = _two_form(z7, z4)
    u56 = _two_form(z7, z3) + _two_form(z6, z4)
    lhs = np.array([u12.real, u12.imag, u34.real, u34.imag, u56.real, u56.imag])
    e1, e2 = frame[:, 0], frame[:, 1]
    d1, d2 = de[:, :, 0], de[:, :, 1]
    rhs = np.array([
        0.5 * _pair_form(e1, d1, d1),
        -0.5 * _pair_form(e2, d1, d1),
        0.5 * _pair_form(e1, d2, d2),
        -0.5 * _pair_form(e2, d2, d2),
        _pair_form(e1, d1, d2),
        -_pair_form(e2, d1, d2),
    ])
    w12 = omega[:, 0, 1]
    basis = np.array([_two_form(w12, omega[:, 4, 0]), _two_form(w12, omega[:, 4, 1])])
    return lhs, rhs, basis


# Upsilon_k - rhs_k = sum_j UPSILON_CONGRUENCE[j, k] * basis_j with basis (w12^w51, w12^w52)
UPSILON_CONGRUENCE = np.array([
    [-1.0, 0.0, 0.0, 0.0, 0.0, 1.0],
    [0.0, 0.0, 0.0, 1.0, -1.0, 0.0],
])


def upsilon_identity_check(lift: CurveLift, node: Optional[Sequence[int]] = None) -> Report:
    """Upsilon_k = rhs_k modulo w51, w52.

    The w51, w52 terms are removed per node with the exact coefficients in
    UPSILON_CONGRUENCE; what remains is the difference-stencil error in w.
    A constant least-squares fit over all nodes is reported for comparison.
    With `node` the residual is taken at that node only.
    """
    _require_surface(lift)
    nodes = lift.interior_nodes()
    defects, bases = [], []
    for n in nodes:
        lhs, rhs, basis = upsilon_values(lift, n)
        defects.append(lhs - rhs)
        bases.append(basis)
    defects = np.array(defects)  # (N, 6)
    bases = np.array(bases)  # (N, 2)
    remainder = defects - bases @ UPSILON_CONGRUENCE
    if np.max(np.abs(bases), initial=0.0) > 0:
        fitted, *_ = np.linalg.lstsq(bases, defects, rcond=None)  # (2, 6)
    else:
        fitted = np.zeros((2, 6))
    if node is not None:
        keep = [nodes.index(tuple(node))]
        remainder, defects = remainder[keep], defects[keep]
    report = Report.from_residuals('upsilon_identities', np.max(np.abs(remainder), axis=-1),
                                   settings.tolerances.adapted)
    report.details.update({
        'raw_defect': float(np.max(np.abs(defects), initial=0.0)),
        'removal_coefficients': {'w12^w51': UPSILON_CONGRUENCE[0].tolist(),
                                 'w12^w52': UPSILON_CONGRUENCE[1].tolist()},
        'fitted_coefficients': {'w12^w51': fitted[0].tolist(), 'w12^w52': fitted[1].tolist()},
    })
    return report


def cr_dictionary_residual(omega: np.ndarray) -> float:
    """SU(3) coframe against CR forms on a g2-valued connection matrix (per direction)."""
    theta, kappa = coframe_from_connection(omega)
    cr = cr_coframe(omega)
    z3, z4, z6, z7 = (cr.zeta[..., k] for k in range(4))
    checks = [
        2 * theta[..., 0] - (-1j * z3 + z4),
        2 * theta[..., 1] - (cr.w52 + 1j * cr.w51),
        2 * theta[..., 2] - (1j * z6 - z7),
        2 * kappa[..., 1, 0] - (1j * z6 + z7),
        2 * kappa[..., 1, 2] - (1j * z3 + z4),
        kappa[..., 2, 0] - (-np.conj(cr.Phi) - theta[..., 1]),
    ]
    return float(max(np.max(np.abs(c)) for c in checks))
