"""
G2 frames, discretized lifts into G2 and their Maurer-Cartan forms.
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
import orjson
import structlog
from scipy.linalg import expm, polar
from scipy.optimize import least_squares

from config.settings import settings
from src.core.errors import BoundaryNodeError, FrameInvariantError, InputError
from src.forms.exterior import PHI_TENSOR
from src.lie.algebra import G2AlgebraElement, g2rel_residual, so7_skew_basis
from src.utils.numerics import grid_derivative, stencil_reach

logger = structlog.get_logger(__name__)


def orthonormality_residual(matrix: np.ndarray) -> np.ndarray:
    matrix = np.asarray(matrix)
    gram = np.swapaxes(matrix, -1, -2) @ matrix
    return np.max(np.abs(gram - np.eye(7)), axis=(-1, -2))


def adaptation_residual(matrix: np.ndarray) -> np.ndarray:
    """max |phi(e_i, e_j, e_k) - phi(eps_i, eps_j, eps_k)| per frame."""
    matrix = np.asarray(matrix)
    pulled = np.einsum('abc,...ai,...bj,...ck->...ijk', PHI_TENSOR, matrix, matrix, matrix)
    return np.max(np.abs(pulled - PHI_TENSOR), axis=(-1, -2, -3))


@dataclass(frozen=True)
class G2Frame:
    """Orthonormal phi-adapted frame; column i is e_(i+1)."""
    e: np.ndarray

    def __post_init__(self):
        matrix = np.asarray(self.e, dtype=float)
        if matrix.shape != (7, 7):
            raise FrameInvariantError(f"frame must be 7x7, got {matrix.shape}")
        object.__setattr__(self, 'e', matrix)

    @classmethod
    def identity(cls) -> 'G2Frame':
        return cls(np.eye(7))

    def validate(self, tol: Optional[float] = None) -> 'G2Frame':
        tol = settings.tolerances.closed_form if tol is None else tol
        ortho = float(orthonormality_residual(self.e))
        if ortho > tol:
            raise FrameInvariantError(f"frame is not orthonormal (residual {ortho:.3e})")
        adapted = float(adaptation_residual(self.e))
        if adapted > tol:
            raise FrameInvariantError(f"frame is not phi-adapted (residual {adapted:.3e})")
        return self

    def column(self, i: int) -> np.ndarray:
        """e_i, 1-based."""
        return self.e[:, i - 1]


def exp_frame(a: G2AlgebraElement, t: float, base: Optional[G2Frame] = None,
              tol: Optional[float] = None) -> G2Frame:
    """base * exp(t a); raises if the result is not a G2 frame."""
    base = base or G2Frame.identity()
    return G2Frame(base.e @ expm(t * a.matrix7)).validate(tol)


def repair_frame(matrix: np.ndarray) -> Tuple[G2Frame, dict]:
    """Project a drifted frame back onto G2.

    Polar decomposition restores orthogonality, then a local least-squares
    solve over so(7) removes the phi-adaptation defect.
    """
    matrix = np.asarray(matrix, dtype=float)
    before = {'orthonormality': float(orthonormality_residual(matrix)),
              'adaptation': float(adaptation_residual(matrix))}
    u, _ = polar(matrix)
    generators = np.array(so7_skew_basis())

    def residual(x):
        candidate = u @ expm(np.tensordot(x, generators, axes=1))
        pulled = np.einsum('abc,ai,bj,ck->ijk', PHI_TENSOR, candidate, candidate, candidate)
        return (pulled - PHI_TENSOR).ravel()

    solution = least_squares(residual, np.zeros(21), xtol=1e-15, ftol=1e-15, gtol=1e-15)
    repaired = u @ expm(np.tensordot(solution.x, generators, axes=1))
    after = {'orthonormality': float(orthonormality_residual(repaired)),
             'adaptation': float(adaptation_residual(repaired))}
    logger.info("frame repaired", before=before, after=after)
    return G2Frame(repaired), {'before': before, 'after': after}


@dataclass
class CurveLift:
    """Frames sampled on a uniform 1D or 2D parameter grid.

    `frames` has shape (n, 7, 7) or (nx, ny, 7, 7); `params` holds one array of
    coordinates per grid axis.
    """
    params: Tuple[np.ndarray, ...]
    frames: np.ndarray
    step: Union[float, Tuple[float, ...]]
    fd_order: int = 2
    points: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=float)
        self.params = tuple(np.asarray(p, dtype=float) for p in self.params)
        if self.frames.shape[-2:] != (7, 7) or self.frames.ndim - 2 != len(self.params):
            raise InputError(f"frames of shape {self.frames.shape} do not match {len(self.params)} grid axes")
        if self.fd_order not in (2, 4):
            raise InputError("fd_order must be 2 or 4")
        steps = self.step if isinstance(self.step, (tuple, list)) else (self.step,) * len(self.params)
        self.step = tuple(float(s) for s in steps)
        for axis, (p, h) in enumerate(zip(self.params, self.step)):
            if p.size != self.frames.shape[axis]:
                raise InputError(f"axis {axis}: {p.size} params for {self.frames.shape[axis]} frames")
            if p.size > 1 and np.max(np.abs(np.diff(p) - h)) > 1e-9 * max(1.0, abs(h)):
                raise InputError(f"axis {axis}: grid spacing is not uniform with step {h}")

    @property
    def dim(self) -> int:
        return len(self.params)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.frames.shape[:-2]

    def nodes(self):
        return np.ndindex(*self.shape)

    def is_interior(self, node: Sequence[int], reach: Optional[int] = None) -> bool:
        reach = stencil_reach(self.fd_order) if reach is None else reach
        return all(reach <= i < n - reach for i, n in zip(node, self.shape))

    def interior_nodes(self, reach: Optional[int] = None):
        return [node for node in self.nodes() if self.is_interior(node, reach)]

    def param_at(self, node: Sequence[int]) -> np.ndarray:
        return np.array([p[i] for p, i in zip(self.params, node)])

    def validate(self, tol: Optional[float] = None) -> 'CurveLift':
        tol = settings.tolerances.closed_form if tol is None else tol
        ortho = float(np.max(orthonormality_residual(self.frames)))
        adapted = float(np.max(adaptation_residual(self.frames)))
        if ortho > tol or adapted > tol:
            raise FrameInvariantError(
                f"lift frames fail invariants (orthonormality {ortho:.3e}, adaptation {adapted:.3e})")
        return self

    @classmethod
    def from_map(cls, frame_map: Callable[[np.ndarray], np.ndarray], axes: Sequence[np.ndarray],
                 fd_order: int = 2, point_map: Optional[Callable] = None, **meta) -> 'CurveLift':
        """Sample a closed-form frame field (and optional point map) on a grid."""
        axes = [np.asarray(a, dtype=float) for a in axes]
        shape = tuple(a.size for a in axes)
        frames = np.empty(shape + (7, 7))
        points = np.empty(shape + (7,)) if point_map is not None else None
        for node in np.ndindex(*shape):
            p = np.array([a[i] for a, i in zip(axes, node)])
            frames[node] = frame_map(p)
            if point_map is not None:
                points[node] = point_map(p)
        steps = tuple(float(a[1] - a[0]) if a.size > 1 else 1.0 for a in axes)
        return cls(params=tuple(axes), frames=frames, step=steps, fd_order=fd_order,
                   points=points, meta=dict(meta))

    def to_dict(self) -> dict:
        data = {
            'step': list(self.step) if self.dim > 1 else self.step[0],
            'fd_order': self.fd_order,
            'frames': self.frames.reshape(-1, 7, 7).tolist(),
        }
        if self.dim == 1:
            data['params'] = self.params[0].tolist()
        else:
            data['grid'] = [p.tolist() for p in self.params]
        if self.points is not None:
            data['points'] = self.points.reshape(-1, 7).tolist()
        return data

    def write_json(self, path: str):
        """Frames are checked at 1e-8 before writing."""
        self.validate(1e-8)
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_bytes(orjson.dumps(self.to_dict()))

    @classmethod
    def from_dict(cls, data: dict) -> 'CurveLift':
        try:
            if 'grid' in data:
                params = tuple(np.asarray(g, dtype=float) for g in data['grid'])
            else:
                params = (np.asarray(data['params'], dtype=float),)
            shape = tuple(p.size for p in params)
            frames = np.asarray(data['frames'], dtype=float).reshape(shape + (7, 7))
            points = data.get('points')
            if points is not None:
                points = np.asarray(points, dtype=float).reshape(shape + (7,))
            return cls(params=params, frames=frames, step=data['step'],
                       fd_order=int(data.get('fd_order', 2)), points=points)
        except (KeyError, ValueError, TypeError) as e:
            raise InputError(f"malformed lift data: {e}") from e

    @classmethod
    def read_json(cls, path: str) -> 'CurveLift':
        try:
            data = orjson.loads(Path(path).read_bytes())
        except (OSError, orjson.JSONDecodeError) as e:
            raise InputError(f"cannot read lift from {path}: {e}") from e
        return cls.from_dict(data).validate(1e-8)


def maurer_cartan(lift: CurveLift, node: Sequence[int]) -> np.ndarray:
    """omega(d/ds) = F^T dF/ds for each grid axis s; shape (dim, 7, 7)."""
    node = tuple(node)
    if not lift.is_interior(node):
        raise BoundaryNodeError(f"node {node} has no central stencil of order {lift.fd_order}")
    frame = lift.frames[node]
    return np.array([
        frame.T @ grid_derivative(lift.frames, node, axis, lift.step[axis], lift.fd_order)
        for axis in range(lift.dim)
    ])


def maurer_cartan_field(lift: CurveLift) -> Tuple[np.ndarray, np.ndarray]:
    """Connection forms at all interior nodes with a mask of valid nodes."""
    omega = np.full(lift.shape + (lift.dim, 7, 7), np.nan)
    mask = np.zeros(lift.shape, dtype=bool)
    for node in lift.interior_nodes():
        omega[node] = maurer_cartan(lift, node)
        mask[node] = True
    return omega, mask


def g2_connection_residual(lift: CurveLift) -> float:
    """Largest g2 relation violation of the connection forms over interior nodes."""
    omega, mask = maurer_cartan_field(lift)
    return float(max((g2rel_residual(omega[node]) for node in zip(*np.nonzero(mask))), default=0.0))


def integrability_residual(lift: CurveLift, node: Sequence[int]) -> float:
    """|d_x w(d_y) - d_y w(d_x) + [w(d_x), w(d_y)]| for a 2D lift (dw = -w^w)."""
    if lift.dim != 2:
        raise InputError("integrability needs a 2D lift")
    node = tuple(node)
    reach = stencil_reach(lift.fd_order)
    if not lift.is_interior(node, 2 * reach):
        raise BoundaryNodeError(f"node {node} too close to the boundary for second derivatives")
    omega, _ = maurer_cartan_field(lift)
    wx, wy = omega[node][0], omega[node][1]
    dx_wy = grid_derivative(omega[..., 1, :, :], node, 0, lift.step[0], lift.fd_order)
    dy_wx = grid_derivative(omega[..., 0, :, :], node, 1, lift.step[1], lift.fd_order)
    return float(np.max(np.abs(dx_wy - dy_wx + wx @ wy - wy @ wx)))
