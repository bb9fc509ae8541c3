"""
The SU(3) structure on S^6: the (u, f, theta, kappa) coframing of a G2 frame
field, holomorphic-curve detection and adaptation, and the torsion functions.

With u = e5 and f = 1/2 (e7 + i e6, -e1 - i e2, -e4 + i e3) the structure
equations read

    du = f (-2i theta) + conj(f) (2i conj(theta))
    df = u (-i conj(theta)^T) + f kappa - conj(f) [theta]
    d theta = -kappa ^ theta - [conj(theta)] ^ conj(theta)

with kappa anti-Hermitian and trace free.
"""
from collections import deque
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np
import structlog

from config.settings import settings
from src.core.errors import (BoundaryNodeError, BranchPointError, DegenerateFrameError,
                             InputError, PreconditionError)
from src.core.report import Report
from src.forms.exterior import cross
from src.lie.frames import CurveLift, maurer_cartan
from src.utils.numerics import grid_derivative, stencil_reach

logger = structlog.get_logger(__name__)

ADAPTATIONS = ('f2', 'f3')


@dataclass(frozen=True)
class SU3Frame:
    """u and the three complex vectors f_k (rows of `f`)."""
    u: np.ndarray
    f: np.ndarray

    def unitary_residual(self) -> float:
        """Deviation from f_k.conj(f_l) = delta/2, f_k.f_l = 0, f_k.u = 0, |u| = 1."""
        herm = self.f @ self.f.conj().T
        sym = self.f @ self.f.T
        return float(max(np.max(np.abs(herm - 0.5 * np.eye(3))),
                         np.max(np.abs(sym)),
                         np.max(np.abs(self.f @ self.u)),
                         abs(self.u @ self.u - 1.0)))


def su3_from_g2(frame: np.ndarray) -> SU3Frame:
    """Works on a 7x7 frame or any stack of them."""
    e = np.asarray(frame, dtype=float)
    c = lambda i: e[..., :, i - 1]
    f = 0.5 * np.stack([c(7) + 1j * c(6), -c(1) - 1j * c(2), -c(4) + 1j * c(3)], axis=-2)
    return SU3Frame(u=c(5), f=f)


def su3_to_g2(su3: SU3Frame) -> np.ndarray:
    f1, f2, f3 = su3.f[..., 0, :], su3.f[..., 1, :], su3.f[..., 2, :]
    columns = [-2 * f2.real, -2 * f2.imag, 2 * f3.imag, -2 * f3.real, su3.u, 2 * f1.imag, 2 * f1.real]
    return np.stack(columns, axis=-1)


def bracket_map(a: np.ndarray) -> np.ndarray:
    """[a]: the skew matrix with [a] b = conj-free cross product pairing."""
    a1, a2, a3 = a[..., 0], a[..., 1], a[..., 2]
    z = np.zeros_like(a1)
    return np.stack([
        np.stack([z, a3, -a2], axis=-1),
        np.stack([-a3, z, a1], axis=-1),
        np.stack([a2, -a1, z], axis=-1),
    ], axis=-2)


def to_bryant_convention(u, f, theta, kappa):
    """(u, f, theta, kappa) -> (u, -f, -theta, kappa); its own inverse."""
    return u, -np.asarray(f), -np.asarray(theta), kappa


@dataclass
class SU3Coframe:
    """theta (dim, 3) and kappa (dim, 3, 3) evaluated on each parameter direction."""
    theta: np.ndarray
    kappa: np.ndarray
    du_residual: float = 0.0
    df_residual: float = 0.0

    def anti_hermitian_residual(self) -> float:
        return float(np.max(np.abs(self.kappa + np.conj(np.swapaxes(self.kappa, -1, -2)))))

    def trace_residual(self) -> float:
        return float(np.max(np.abs(np.trace(self.kappa, axis1=-2, axis2=-1))))


def coframe_from_connection(omega: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """theta and kappa = alpha + i beta read off a g2-valued connection matrix.

    omega[..., i-1, j-1] is w_ij = <e_i, de_j>.
    """
    w = lambda i, j: omega[..., i - 1, j - 1]
    theta = 0.5 * np.stack([w(6, 5) + 1j * w(7, 5),
                            -w(2, 5) - 1j * w(1, 5),
                            w(3, 5) - 1j * w(4, 5)], axis=-1)
    a12 = w(1, 7) + 0.5 * w(3, 5)
    a13 = -w(3, 6) - 0.5 * w(2, 5)
    a23 = -w(2, 3) + 0.5 * w(5, 6)
    b12 = -w(1, 6) + 0.5 * w(4, 5)
    b13 = -w(3, 7) + 0.5 * w(1, 5)
    b23 = -w(1, 3) - 0.5 * w(5, 7)
    z = np.zeros_like(a12)
    alpha = np.stack([np.stack([z, a12, a13], -1),
                      np.stack([-a12, z, a23], -1),
                      np.stack([-a13, -a23, z], -1)], -2)
    beta = np.stack([np.stack([-w(6, 7), b12, b13], -1),
                     np.stack([b12, w(1, 2), b23], -1),
                     np.stack([b13, b23, w(3, 4)], -1)], -2)
    return theta, alpha + 1j * beta


def _theta_lstsq(su3: SU3Frame, du: np.ndarray) -> Tuple[np.ndarray, float]:
    # du = 2 Re(sum_k f_k c_k) with c = -2i theta
    system = np.column_stack([2 * su3.f.real.T, -2 * su3.f.imag.T])
    if np.linalg.cond(system) > 1e8:
        raise DegenerateFrameError("SU(3) frame is degenerate; theta solve is ill-conditioned")
    x, *_ = np.linalg.lstsq(system, du, rcond=None)
    c = x[:3] + 1j * x[3:]
    return 0.5j * c, float(np.max(np.abs(system @ x - du)))


def su3_coframe(lift: CurveLift, node: Sequence[int]) -> SU3Coframe:
    """theta from the du equation, kappa = 2 conj(f) . df, with reconstruction residuals."""
    node = tuple(node)
    if not lift.is_interior(node):
        raise BoundaryNodeError(f"node {node} has no central stencil")
    su3 = su3_from_g2(lift.frames[node])
    thetas, kappas = [], []
    du_res, df_res = 0.0, 0.0
    for axis in range(lift.dim):
        d_frame = grid_derivative(lift.frames, node, axis, lift.step[axis], lift.fd_order)
        d_su3 = su3_from_g2(d_frame)
        theta, res = _theta_lstsq(su3, d_frame[:, 4])
        kappa = 2 * su3.f.conj() @ d_su3.f.T
        rebuilt = (np.outer(-1j * theta.conj(), su3.u)
                   + kappa.T @ su3.f
                   - bracket_map(theta).T @ su3.f.conj())
        thetas.append(theta)
        kappas.append(kappa)
        du_res = max(du_res, res)
        df_res = max(df_res, float(np.max(np.abs(rebuilt - d_su3.f))))
    return SU3Coframe(theta=np.array(thetas), kappa=np.array(kappas),
                      du_residual=du_res, df_residual=df_res)


def coframe_field(lift: CurveLift) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """theta and kappa at every interior node plus the validity mask."""
    theta = np.full(lift.shape + (lift.dim, 3), np.nan, dtype=complex)
    kappa = np.full(lift.shape + (lift.dim, 3, 3), np.nan, dtype=complex)
    mask = np.zeros(lift.shape, dtype=bool)
    for node in lift.interior_nodes():
        cf = su3_coframe(lift, node)
        theta[node], kappa[node], mask[node] = cf.theta, cf.kappa, True
    return theta, kappa, mask


def _require_surface(lift: CurveLift):
    if lift.dim != 2:
        raise InputError("operation needs a 2D lift")


def _minors(tx: np.ndarray, ty: np.ndarray) -> np.ndarray:
    pairs = [(0, 1), (0, 2), (1, 2)]
    return np.array([tx[..., i] * ty[..., j] - tx[..., j] * ty[..., i] for i, j in pairs])


def holomorphicity_residual(surface: CurveLift) -> Report:
    """theta_i ^ theta_j = 0: all 2x2 minors of [theta(dx), theta(dy)] vanish."""
    _require_surface(surface)
    theta, _, mask = coframe_field(surface)
    tol = settings.tolerances.finite_difference
    residuals, excluded = [], 0
    for node in zip(*np.nonzero(mask)):
        tx, ty = theta[node][0], theta[node][1]
        if np.linalg.norm(tx) < settings.tolerances.branch_point and np.linalg.norm(ty) < settings.tolerances.branch_point:
            excluded += 1
            continue
        residuals.append(np.max(np.abs(_minors(tx, ty))))
    if not residuals:
        return Report(name='holomorphicity', max_residual=0.0, tolerance=tol, passed=False,
                      n_excluded=excluded, flags=['degenerate'])
    return Report.from_residuals('holomorphicity', residuals, tol, excluded=excluded)


def _complex_dot(a: np.ndarray, b: np.ndarray) -> complex:
    return complex(np.sum(a * b))


def _first_normal_direction(f1_field: np.ndarray, u_field: np.ndarray, node, step, order):
    """(1,0)-part of d f1'(dx) orthogonal to u and f1'."""
    v = grid_derivative(f1_field, node, 0, step, order)
    u = u_field[node]
    f1 = f1_field[node]
    v = v - u * _complex_dot(u, v)
    p = 0.5 * (v - 1j * cross(u, v))
    return p - f1 * (2 * _complex_dot(f1.conj(), p))


def _normalize(c: np.ndarray) -> np.ndarray:
    return c / np.linalg.norm(c)


def adapt_holomorphic(surface: CurveLift, mode: str = 'f2') -> CurveLift:
    """Rotate each frame by SU(3) so theta2 = theta3 = 0 and f1 is tangent-adapted.

    mode 'f2': f3 spans the first normal line, so kappa21 = 0 and f2 spans N2.
    mode 'f3': f2 spans the first normal line, so kappa31 = 0 and f3 spans N2.
    theta1(dx) is made real positive; the remaining phase of the normal vector is
    fixed against the input frame, or by breadth-first continuity where the
    input gives no preference. The output grid drops the nodes whose stencils
    leave the input grid.
    """
    _require_surface(surface)
    if mode not in ADAPTATIONS:
        raise InputError(f"unknown adaptation mode {mode!r}; expected one of {ADAPTATIONS}")
    holo = holomorphicity_residual(surface)
    if 'degenerate' in holo.flags:
        raise PreconditionError("u is constant on the surface; nothing to adapt")
    if not holo.passed:
        raise PreconditionError(f"surface is not holomorphic (residual {holo.max_residual:.3e})")

    reach = stencil_reach(surface.fd_order)
    su3 = su3_from_g2(surface.frames)
    branch_tol = settings.tolerances.branch_point

    # f1' = (u x d + i d) / (2|d|) with d = du(dx)
    f1_field = np.full(surface.shape + (7,), np.nan, dtype=complex)
    speed = np.zeros(surface.shape)
    for node in surface.interior_nodes():
        d = grid_derivative(surface.frames[..., :, 4], node, 0, surface.step[0], surface.fd_order)
        speed[node] = np.linalg.norm(d)
        if speed[node] > branch_tol:
            f1_field[node] = (cross(su3.u[node], d) + 1j * d) / (2 * speed[node])

    inner = [n for n in surface.interior_nodes(2 * reach)]
    excluded = [n for n in inner if speed[n] <= branch_tol or any(
        speed[tuple(m)] <= branch_tol for m in _stencil_nodes(n, reach))]
    valid = [n for n in inner if n not in excluded]
    if not valid:
        raise PreconditionError("no node has a non-degenerate tangent")

    normal_slot = 2 if mode == 'f2' else 1
    c1, cw, ratio = {}, {}, {}
    for node in valid:
        f_old = su3.f[node]
        c1[node] = 2 * f_old.conj() @ f1_field[node]
        w = _first_normal_direction(f1_field, su3.u, node, surface.step[0], surface.fd_order)
        ratio[node] = np.linalg.norm(w) / speed[node]
        cw[node] = 2 * f_old.conj() @ w

    round_branch = max(ratio.values()) < settings.tolerances.round_branch
    if round_branch:
        logger.warning("first normal vanishes; round S2 branch", max_ratio=max(ratio.values()))
        for node in valid:
            target = np.eye(3)[normal_slot]
            v = target - c1[node] * np.vdot(c1[node], target)
            if np.linalg.norm(v) < 0.1:
                target = np.eye(3)[3 - normal_slot]
                v = target - c1[node] * np.vdot(c1[node], target)
            cw[node] = v
    cw = {n: _normalize(v) for n, v in cw.items()}
    _fix_normal_phases(cw, normal_slot, valid)

    frames = surface.frames.copy()
    for node in valid:
        a, n = c1[node], cw[node]
        if mode == 'f2':
            c3 = n
            c2 = np.conj(np.cross(c3, a))
        else:
            c2 = n
            c3 = np.conj(np.cross(a, c2))
        gauge = np.column_stack([a, c2, c3])
        f_new = gauge.T @ su3.f[node]
        frames[node] = su3_to_g2(SU3Frame(u=su3.u[node], f=f_new))

    lo, hi = 2 * reach, [s - 2 * reach for s in surface.shape]
    crop = (slice(lo, hi[0]), slice(lo, hi[1]))
    meta = dict(surface.meta, adaptation=mode, round_branch=bool(round_branch),
                excluded=[[int(i - lo) for i in n] for n in excluded])
    logger.info("surface adapted", mode=mode, nodes=len(valid), excluded=len(excluded),
                round_branch=round_branch)
    return CurveLift(params=tuple(p[lo:h] for p, h in zip(surface.params, hi)),
                     frames=frames[crop], step=surface.step, fd_order=surface.fd_order,
                     points=None if surface.points is None else surface.points[crop], meta=meta)


def _stencil_nodes(node, reach):
    for axis in range(len(node)):
        for off in range(-reach, reach + 1):
            m = list(node)
            m[axis] += off
            yield m


def _fix_normal_phases(cw: Dict, slot: int, order: List):
    """Phase each normal so its input component is real positive, else continue from a neighbour."""
    if not order:
        return
    done = set()
    queue = deque([order[0]])
    valid = set(order)
    while queue or len(done) < len(valid):
        if not queue:
            queue.append(next(n for n in order if n not in done))
        node = queue.popleft()
        if node in done:
            continue
        v = cw[node]
        neighbour = next((m for m in _neighbours(node) if m in done), None)
        if abs(v[slot]) > 0.5 or neighbour is None:
            ref = v[slot] if abs(v[slot]) > 1e-12 else 1.0
        else:
            ref = np.vdot(cw[neighbour], v)
        cw[node] = v * np.conj(ref) / abs(ref)
        done.add(node)
        queue.extend(m for m in _neighbours(node) if m in valid and m not in done)


def _neighbours(node):
    i, j = node
    return [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)]


def _torsion_indices(mode: str):
    # (first normal component of df1, second normal component of d(first normal))
    return ((2, 0), (1, 2)) if mode == 'f2' else ((1, 0), (2, 1))


def torsion(adapted: CurveLift, node: Sequence[int]) -> Tuple[complex, complex, float]:
    """H1, H2 fitted from kappa_N1,1 = H1 theta1 and kappa_N2,N1 = H2 theta1."""
    _require_surface(adapted)
    cf = su3_coframe(adapted, node)
    t1 = cf.theta[:, 0]
    norm = float(np.sum(np.abs(t1) ** 2))
    if np.sqrt(norm) < settings.tolerances.branch_point:
        raise BranchPointError(f"theta1 vanishes at node {tuple(node)}")
    (a, b), (c, d) = _torsion_indices(adapted.meta.get('adaptation', 'f2'))
    k1, k2 = cf.kappa[:, a, b], cf.kappa[:, c, d]
    h1 = complex(np.sum(np.conj(t1) * k1) / norm)
    h2 = complex(np.sum(np.conj(t1) * k2) / norm)
    fit = float(max(np.max(np.abs(k1 - h1 * t1)), np.max(np.abs(k2 - h2 * t1))))
    return h1, h2, fit


def torsion_field(adapted: CurveLift):
    """H1, H2 and fit residuals over interior nodes; branch nodes are NaN."""
    h1 = np.full(adapted.shape, np.nan, dtype=complex)
    h2 = np.full(adapted.shape, np.nan, dtype=complex)
    fit = np.full(adapted.shape, np.nan)
    excluded = 0
    for node in adapted.interior_nodes():
        try:
            h1[node], h2[node], fit[node] = torsion(adapted, node)
        except BranchPointError:
            excluded += 1
    return h1, h2, fit, excluded


def adapted_ideal_residual(adapted: CurveLift) -> Report:
    """theta2, theta3 and the vanishing kappa entry on an adapted lift."""
    theta, kappa, mask = coframe_field(adapted)
    zero = (1, 0) if adapted.meta.get('adaptation', 'f2') == 'f2' else (2, 0)
    values = [max(np.max(np.abs(theta[n][:, 1:])), np.max(np.abs(kappa[n][:, zero[0], zero[1]])))
              for n in zip(*np.nonzero(mask))]
    flags = ['round_branch'] if adapted.meta.get('round_branch') else []
    return Report.from_residuals('adapted_ideal', values, settings.tolerances.adapted, flags=flags)


def null_torsion_residual(adapted: CurveLift) -> Report:
    _, h2, _, excluded = torsion_field(adapted)
    values = np.abs(h2[np.isfinite(h2)])
    return Report.from_residuals('null_torsion', values, settings.tolerances.adapted, excluded=excluded)


def h1_holomorphy_residual(adapted: CurveLift) -> Report:
    """dH1 ^ theta1 = 0, i.e. the discrete d-bar of H1 along the curve."""
    h1, _, _, excluded = torsion_field(adapted)
    theta, _, _ = coframe_field(adapted)
    reach = stencil_reach(adapted.fd_order)
    values = []
    for node in adapted.interior_nodes(2 * reach):
        if not all(np.isfinite(h1[tuple(m)]) for m in _stencil_nodes(node, reach)):
            continue
        dh = [grid_derivative(h1, node, axis, adapted.step[axis], adapted.fd_order) for axis in range(2)]
        t1 = theta[node][:, 0]
        values.append(abs(dh[0] * t1[1] - dh[1] * t1[0]))
    return Report.from_residuals('h1_holomorphic', values, settings.tolerances.holomorphy,
                                 excluded=excluded)


def structure_equation_residual(lift: CurveLift) -> Report:
    """d theta + kappa ^ theta + [conj theta] ^ conj theta = 0 plus kappa in su(3)."""
    _require_surface(lift)
    theta, kappa, mask = coframe_field(lift)
    reach = stencil_reach(lift.fd_order)
    values = []
    for node in lift.interior_nodes(2 * reach):
        tx, ty = theta[node]
        kx, ky = kappa[node]
        d_theta = (grid_derivative(theta[..., 1, :], node, 0, lift.step[0], lift.fd_order)
                   - grid_derivative(theta[..., 0, :], node, 1, lift.step[1], lift.fd_order))
        k_wedge = kx @ ty - ky @ tx
        b_wedge = bracket_map(tx.conj()) @ ty.conj() - bracket_map(ty.conj()) @ tx.conj()
        values.append(np.max(np.abs(d_theta + k_wedge + b_wedge)))
    su3_values = [max(np.max(np.abs(kappa[n] + np.conj(np.swapaxes(kappa[n], -1, -2)))),
                      np.max(np.abs(np.trace(kappa[n], axis1=-2, axis2=-1))))
                  for n in zip(*np.nonzero(mask))]
    report = Report.from_residuals('structure_equations', values, settings.tolerances.adapted)
    report.details['kappa_su3_residual'] = float(max(su3_values, default=0.0))
    return report


def coframe_consistency_residual(lift: CurveLift) -> float:
    """Projection-based coframe against the closed form on the connection matrix."""
    worst = 0.0
    for node in lift.interior_nodes():
        cf = su3_coframe(lift, node)
        theta, kappa = coframe_from_connection(maurer_cartan(lift, node))
        worst = max(worst, float(np.max(np.abs(cf.theta - theta))), float(np.max(np.abs(cf.kappa - kappa))))
    return worst
