"""
Explicit constructions: round S^2 frame fields, CP^2-fiber curves, binormal
re-framing, the S^1-invariant surface bundles over a null-torsion base and the
SU(2)-invariant Harvey-Lawson 4-folds.
"""
from typing import Callable, Optional, Sequence

import numpy as np
import structlog
from scipy.linalg import expm
from scipy.optimize import least_squares

from config.settings import settings
from src.core.errors import InputError, UnadaptedBaseError
from src.forms.exterior import phi
from src.families.profile import SQRT5_2, ProfileCurve, profile_derivative, profile_point
from src.frames.su3 import SU3Frame, coframe_field, coframe_from_connection, su3_from_g2, su3_to_g2
from src.grassmann.fourfold import Fourfold
from src.lie.algebra import G2AlgebraElement, embed, g2_basis
from src.lie.frames import CurveLift, maurer_cartan
from src.utils.numerics import map_derivative

logger = structlog.get_logger(__name__)


def theta_from(entries) -> np.ndarray:
    """Skew 4x4 matrix from {(i, j): value} with 1-based i < j."""
    theta = np.zeros((4, 4))
    for (i, j), value in entries.items():
        theta[i - 1, j - 1] = value
        theta[j - 1, i - 1] = -value
    return theta


def _block(entries) -> G2AlgebraElement:
    return embed(theta_from(entries), np.zeros((3, 4)))


# u = e5 turns towards e6 under X_ROUND and towards e7 under Y_ROUND
X_ROUND = _block({(1, 4): -0.5, (2, 3): -0.5})
Y_ROUND = _block({(1, 3): 0.5, (2, 4): -0.5})

# self-dual su(2): unit speed on T, rotations of V+ at twice the speed
SU2 = (
    _block({(1, 2): 1.0, (3, 4): 1.0}),
    _block({(1, 3): 1.0, (2, 4): -1.0}),
    _block({(1, 4): 1.0, (2, 3): 1.0}),
)
FIBER_GENERATOR = SU2[0]

# e1' = -e4, e2' = e3, e3' = -e2, e4' = e1: f2' = -f3, f3' = f2
BINORMAL_CHANGE = np.eye(7)
BINORMAL_CHANGE[:, :4] = np.column_stack([-np.eye(7)[:, 3], np.eye(7)[:, 2], -np.eye(7)[:, 1], np.eye(7)[:, 0]])

MAX_MERCATOR = 20.0


def centered_axis(n: Optional[int] = None, step: Optional[float] = None) -> np.ndarray:
    n = n or settings.grid.base_nodes
    step = step or settings.grid.base_spacing
    return (np.arange(n) - (n - 1) / 2.0) * step


def mercator_latitude(s):
    return np.arctan(np.sinh(s))


def round_s2_frame(p: np.ndarray) -> np.ndarray:
    """exp(alpha X) exp(beta(s) Y); conformal in alpha + i s."""
    alpha, s = p
    return expm(alpha * X_ROUND.matrix7) @ expm(mercator_latitude(s) * Y_ROUND.matrix7)


def round_s2_connection(p: np.ndarray) -> np.ndarray:
    """Exact Maurer-Cartan form of round_s2_frame on (d/dalpha, d/ds)."""
    _, s = p
    rot = expm(mercator_latitude(s) * Y_ROUND.matrix7)
    return np.array([rot.T @ X_ROUND.matrix7 @ rot, Y_ROUND.matrix7 / np.cosh(s)])


def round_s2_frame_field(alpha_grid: Optional[Sequence[float]] = None,
                         s_grid: Optional[Sequence[float]] = None,
                         fd_order: Optional[int] = None) -> CurveLift:
    """Lift of the round S^2 in V+ = span(e5, e6, e7) in Mercator coordinates."""
    alpha_grid = centered_axis() if alpha_grid is None else np.asarray(alpha_grid, dtype=float)
    s_grid = centered_axis() if s_grid is None else np.asarray(s_grid, dtype=float)
    if np.max(np.abs(s_grid)) > MAX_MERCATOR:
        raise InputError("Mercator grid reaches the poles of the sphere")
    return CurveLift.from_map(round_s2_frame, (alpha_grid, s_grid),
                              fd_order=fd_order or settings.grid.fd_order, family='round-s2')


def frame_with_u(s0: np.ndarray) -> np.ndarray:
    """A G2 frame whose e5 is the unit vector s0 (transvection from eps5)."""
    s0 = np.asarray(s0, dtype=float)
    if abs(np.linalg.norm(s0) - 1.0) > settings.tolerances.closed_form:
        raise InputError("s0 must be a unit vector")
    e5 = np.eye(7)[:, 4]
    c = float(np.clip(s0 @ e5, -1.0, 1.0))
    v = s0 - c * e5
    if np.linalg.norm(v) < 1e-14:
        if c > 0:
            return np.eye(7)
        v = np.eye(7)[:, 5]
    v = v / np.linalg.norm(v)

    basis = np.array([b.matrix7 for b in g2_basis()])
    q, _ = np.linalg.qr(basis.reshape(14, 49).T)
    ortho = q.T.reshape(14, 7, 7)
    coeffs, *_ = np.linalg.lstsq(ortho[:, :, 4].T, v, rcond=None)
    x0 = np.arccos(c) * coeffs

    def residual(x):
        return expm(np.tensordot(x, ortho, axes=1))[:, 4] - s0

    if np.max(np.abs(residual(x0))) > 1e-12:
        x0 = least_squares(residual, x0, xtol=1e-15, ftol=1e-15, gtol=1e-15).x
    return expm(np.tensordot(x0, ortho, axes=1))


def _complement(c: np.ndarray) -> np.ndarray:
    m = int(np.argmin(np.abs(c)))
    e = np.eye(3, dtype=complex)[m]
    return e - c * np.vdot(c, e)


def fiber_curve(s0: np.ndarray, line_family: Callable[[complex], np.ndarray],
                x_grid: Optional[Sequence[float]] = None, y_grid: Optional[Sequence[float]] = None,
                fd_order: Optional[int] = None, derivative_step: float = 1e-6) -> CurveLift:
    """Frames with e5 = s0 fixed and e1 ^ e2 the complex line l(w), w = x - iy.

    The line is given by its coefficients in the f-vectors of a frame with e5 = s0,
    so it lies in s0-perp and is complex for J = s0 x (.).
    """
    base = frame_with_u(s0)
    f_std = su3_from_g2(base).f
    u = base[:, 4]
    excluded = []

    def frame_map(p: np.ndarray) -> np.ndarray:
        w = complex(p[0], -p[1])
        line = np.asarray(line_family(w), dtype=complex)
        norm = np.linalg.norm(line)
        if norm < settings.tolerances.branch_point:
            excluded.append(p.tolist())
            return base
        c2 = line / norm
        dl = (np.asarray(line_family(w + derivative_step), dtype=complex)
              - np.asarray(line_family(w - derivative_step), dtype=complex)) / (2 * derivative_step)
        v = dl - c2 * np.vdot(c2, dl)
        if np.linalg.norm(v) < 1e-9:
            v = _complement(c2)
        c1 = v / np.linalg.norm(v)
        c3 = np.conj(np.cross(c1, c2))
        gauge = np.column_stack([c1, c2, c3])
        return su3_to_g2(SU3Frame(u=u, f=gauge.T @ f_std))

    x_grid = centered_axis() if x_grid is None else np.asarray(x_grid, dtype=float)
    y_grid = centered_axis() if y_grid is None else np.asarray(y_grid, dtype=float)
    lift = CurveLift.from_map(frame_map, (x_grid, y_grid), fd_order=fd_order or settings.grid.fd_order,
                              family='fiber', s0=np.asarray(s0).tolist())
    lift.meta['excluded'] = excluded
    lift.meta['constant'] = bool(np.max(np.abs(lift.frames - lift.frames[0, 0])) < 1e-14)
    if excluded:
        logger.warning("line family degenerate at nodes", count=len(excluded))
    return lift


def binormal_lift(lift: CurveLift) -> CurveLift:
    """Constant G2 change moving the second normal line into the e1 ^ e2 slot."""
    return CurveLift(params=lift.params, frames=lift.frames @ BINORMAL_CHANGE, step=lift.step,
                     fd_order=lift.fd_order, points=lift.points,
                     meta=dict(lift.meta, binormal=True))


def fiber_rotation(frame: np.ndarray, angle: float) -> np.ndarray:
    """S^1 action on N2: f -> f diag(e^{-2i angle}, e^{i angle}, e^{i angle})."""
    return frame @ expm(angle * FIBER_GENERATOR.matrix7)


def fiber_gauge(angle: float) -> np.ndarray:
    return np.diag([np.exp(-2j * angle), np.exp(1j * angle), np.exp(1j * angle)])


def verification_framing(frame: np.ndarray, t: float, angle: float, k: float):
    """Orthonormal tangent framing h1..h4 of the surface bundle at one sample."""
    z, w = profile_point(t, k)
    su3 = su3_from_g2(fiber_rotation(frame, angle))
    f1, f2, f3 = su3.f
    d = z * z + 4 * w * w
    r = np.sqrt(d)
    h1 = ((z * z - 4 * w * w) / d) * 2 * f3.imag + (-4 * z * w / d) * su3.u
    h2 = -2 * f3.real
    h3 = (4 * w * f1.imag + 2 * z * f2.imag) / r
    h4 = (4 * w * f1.real - 2 * z * f2.real) / r
    return h1, h2, h3, h4


def check_adapted_base(base: CurveLift, connection: Optional[Callable] = None) -> float:
    """theta2, theta3 and kappa31 must vanish: f3 spans the second normal."""
    if base.dim != 2:
        raise InputError("surface bundles need a 2D base")
    if connection is not None:
        theta, kappa = coframe_from_connection(
            np.array([connection(base.param_at(n)) for n in base.nodes()]))
    else:
        theta_f, kappa_f, mask = coframe_field(base)
        theta, kappa = theta_f[mask], kappa_f[mask]
    residual = float(max(np.max(np.abs(theta[..., 1:])), np.max(np.abs(kappa[..., 2, 0]))))
    if residual > settings.tolerances.adapted:
        raise UnadaptedBaseError(f"base is not adapted with f3 spanning N2 (residual {residual:.3e})")
    return residual


def _profile_samples(k: float, t_grid, branch: str, piece: str, r_grid):
    if k < 0:
        raise InputError(f"k must be nonnegative, got {k}")
    if k > 0:
        t_grid = ProfileCurve(k).t_grid(branch) if t_grid is None else t_grid
        return [(t, *profile_point(t, k), *profile_derivative(t, k)) for t in t_grid]
    r_grid = settings.grid.r_grid if r_grid is None else r_grid
    if piece == 'cone':
        return [(r, r, SQRT5_2 * r, 1.0, SQRT5_2) for r in r_grid]
    if piece == 'plane':
        return [(r, r, 0.0, 1.0, 0.0) for r in r_grid]
    raise InputError(f"unknown k = 0 piece {piece!r}; expected 'cone' or 'plane'")


def surface_bundle(base: CurveLift, k: float, t_grid: Optional[Sequence[float]] = None,
                   angle_grid: Optional[Sequence[float]] = None, branch: str = 'outer',
                   piece: str = 'cone', connection: Optional[Callable] = None,
                   r_grid: Optional[Sequence[float]] = None) -> Fourfold:
    """x = w u + 2 z Im(e^{i angle} f3) over base x profile x circle.

    With `connection` (exact Maurer-Cartan form of the base) tangents are
    analytic and every base node is used; otherwise base tangents come from
    finite differences on interior nodes. At k = 0 the profile degenerates to
    the cone w = (sqrt5/2) z or the plane w = 0, parametrized by z = r.
    """
    check_adapted_base(base, connection)
    angle_grid = (np.linspace(0, 2 * np.pi, settings.grid.angle_samples, endpoint=False)
                  if angle_grid is None else np.asarray(angle_grid, dtype=float))
    profile = _profile_samples(k, t_grid, branch, piece, r_grid)
    rotations = [(a, expm(a * FIBER_GENERATOR.matrix7)) for a in angle_grid]
    gen = FIBER_GENERATOR.matrix7
    e3, e5 = np.eye(7)[:, 2], np.eye(7)[:, 4]

    nodes = list(base.nodes()) if connection is not None else base.interior_nodes()
    points, tangents, coords = [], [], []
    for node in nodes:
        frame = base.frames[node]
        sigma = base.param_at(node)
        omega = connection(sigma) if connection is not None else maurer_cartan(base, node)
        for t, z, w, dz, dw in profile:
            v = z * e3 + w * e5
            dv = dz * e3 + dw * e5
            for angle, rot in rotations:
                gv = rot @ v
                points.append(frame @ gv)
                tangents.append(np.column_stack([frame @ omega[0] @ gv, frame @ omega[1] @ gv,
                                                 frame @ rot @ dv, frame @ rot @ gen @ v]))
                coords.append([sigma[0], sigma[1], t, angle])
    label = f"bundle:k={k:g}:{branch if k > 0 else piece}"
    logger.info("surface bundle sampled", label=label, samples=len(points), analytic=connection is not None)
    return Fourfold(points=np.array(points), tangents=np.array(tangents), coords=np.array(coords),
                    analytic=connection is not None, label=label,
                    coord_names=('sigma1', 'sigma2', 't', 'angle'),
                    meta={'k': k, 'branch': branch if k > 0 else piece})


def hl_fourfold(k: float, t_grid: Optional[Sequence[float]] = None, branch: str = 'outer',
                euler_grid: Optional[Sequence[Sequence[float]]] = None,
                tangent_step: Optional[float] = None) -> Fourfold:
    """SU(2)-orbit of z eps3 + w eps5 along the profile curve.

    The orbit is swept by exp(a X1) exp(b X2) exp(c X1); b stays away from the
    Euler singularities. Tangents are analytic unless `tangent_step` asks for
    central differences of the point map.
    """
    if k <= 0:
        raise InputError(f"k must be positive, got {k}")
    t_grid = ProfileCurve(k).t_grid(branch) if t_grid is None else t_grid
    n = settings.grid.angle_samples
    if euler_grid is None:
        full = np.linspace(0, 2 * np.pi, n, endpoint=False)
        euler_grid = (full, np.linspace(0.2, 1.3, n), full)
    x1, x2 = SU2[0].matrix7, SU2[1].matrix7
    ea = [(a, expm(a * x1)) for a in euler_grid[0]]
    eb = [(b, expm(b * x2)) for b in euler_grid[1]]
    ec = [(c, expm(c * x1)) for c in euler_grid[2]]
    e3, e5 = np.eye(7)[:, 2], np.eye(7)[:, 4]

    def point_map(p: np.ndarray) -> np.ndarray:
        z, w = profile_point(p[3], k)
        return expm(p[0] * x1) @ expm(p[1] * x2) @ expm(p[2] * x1) @ (z * e3 + w * e5)

    points, tangents, coords = [], [], []
    for t in t_grid:
        z, w = profile_point(t, k)
        dz, dw = profile_derivative(t, k)
        v, dv = z * e3 + w * e5, dz * e3 + dw * e5
        for a, ga in ea:
            for b, gb in eb:
                for c, gc in ec:
                    g = ga @ gb @ gc
                    points.append(g @ v)
                    if tangent_step is None:
                        tangents.append(np.column_stack([x1 @ g @ v, ga @ x2 @ gb @ gc @ v,
                                                         g @ x1 @ v, g @ dv]))
                    else:
                        p = np.array([a, b, c, t])
                        tangents.append(np.column_stack(
                            [map_derivative(point_map, p, axis, tangent_step) for axis in range(4)]))
                    coords.append([a, b, c, t])
    return Fourfold(points=np.array(points), tangents=np.array(tangents), coords=np.array(coords),
                    analytic=tangent_step is None, label=f"hl:k={k:g}:{branch}", coord_names=('a', 'b', 'c', 't'),
                    meta={'k': k, 'branch': branch})


def hl_implicit_residual(x: np.ndarray, k: float) -> np.ndarray:
    """s (s^2 - 5/4 r4^2)^2 - k^5 with r4 = |x1..x4| and s = |x5..x7|."""
    x = np.asarray(x, dtype=float)
    r4 = np.linalg.norm(x[..., :4], axis=-1)
    s = np.linalg.norm(x[..., 4:], axis=-1)
    return s * (s * s - 1.25 * r4 * r4) ** 2 - k ** 5


def random_lift(seed: int, shape: Sequence[int] = (9, 9), step: float = 1e-2,
                fd_order: int = 2) -> CurveLift:
    """Smooth generic G2 lift exp of a random quadratic g2-valued polynomial."""
    rng = np.random.default_rng(seed)
    basis = np.array([b.matrix7 for b in g2_basis()])

    def element() -> np.ndarray:
        return np.tensordot(rng.standard_normal(14), basis, axes=1)

    base = expm(element())
    a, b, c, d = element(), element(), element(), element()

    def frame_map(p: np.ndarray) -> np.ndarray:
        x, y = p
        return base @ expm(x * a + y * b + x * x * c + x * y * d)

    axes = [centered_axis(n, step) for n in shape]
    return CurveLift.from_map(frame_map, axes, fd_order=fd_order, family='random', seed=seed)


def t_plane_lift(x_grid: Optional[Sequence[float]] = None, y_grid: Optional[Sequence[float]] = None,
                 fd_order: Optional[int] = None) -> CurveLift:
    """Planes e1 ^ e2 turning inside T = span(e1..e4) under the self-dual su(2)."""
    x2, x3 = SU2[1].matrix7, SU2[2].matrix7

    def frame_map(p: np.ndarray) -> np.ndarray:
        return expm(p[0] * x2) @ expm(p[1] * x3)

    x_grid = centered_axis() if x_grid is None else np.asarray(x_grid, dtype=float)
    y_grid = centered_axis() if y_grid is None else np.asarray(y_grid, dtype=float)
    return CurveLift.from_map(frame_map, (x_grid, y_grid), fd_order=fd_order or settings.grid.fd_order,
                              family='t-plane')


def degree_one_line(w: complex) -> np.ndarray:
    """The line family l(w) = (w, 1, 0)."""
    return np.array([w, 1.0, 0.0], dtype=complex)


def bundle_framing_residual(base: CurveLift, k: float, t_grid: Sequence[float],
                            angle_grid: Sequence[float]) -> float:
    """max |phi(h_i, h_j, h_k)| over base nodes, profile and fiber samples."""
    worst = 0.0
    for node in base.nodes():
        for t in t_grid:
            for angle in angle_grid:
                h = verification_framing(base.frames[node], t, angle, k)
                for i, j, l in ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)):
                    worst = max(worst, abs(float(phi(h[i], h[j], h[l]))))
    return worst
