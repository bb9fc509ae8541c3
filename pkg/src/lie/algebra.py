"""
The Lie algebra g2 inside so(7).

An element acts on R^7 = T + V+ (T = span e1..e4, V+ = span e5..e7) by the
skew matrix

    [[theta, -beta^T],
     [beta,  sigma+(theta)]]

where theta is in so(T), beta is a 3 x 4 block (rows 5, 6, 7) and sigma+ is the
induced action on self-dual 2-forms. The seven linear relations cutting g2 out
of so(7), in matrix entries m_ij (row i, column j, 1-based):

    m67 = m12 + m34        m51 + m64 - m73 = 0
    m75 = m13 - m24        m52 + m63 + m74 = 0
    m56 = m14 + m23        m53 - m62 + m71 = 0
                           m54 - m61 - m72 = 0

The right-hand column is i*b5 + j*b6 + k*b7 = 0 for the quaternions
b_a = m_a1 + m_a2 i + m_a3 j + m_a4 k.
"""
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Optional

import numpy as np
import structlog
from scipy.linalg import null_space

from config.settings import settings
from src.core.errors import InputError, InternalConsistencyError, RelationError
from src.forms.exterior import PHI_TENSOR

logger = structlog.get_logger(__name__)

# (name, [(row, col, coeff)]) with 1-based matrix entries; each row sums to zero on g2
G2_RELATIONS = [
    ('sigma67', [(6, 7, 1.0), (1, 2, -1.0), (3, 4, -1.0)]),
    ('sigma75', [(7, 5, 1.0), (1, 3, -1.0), (2, 4, 1.0)]),
    ('sigma56', [(5, 6, 1.0), (1, 4, -1.0), (2, 3, -1.0)]),
    ('real', [(5, 1, 1.0), (6, 4, 1.0), (7, 3, -1.0)]),
    ('i', [(5, 2, 1.0), (6, 3, 1.0), (7, 4, 1.0)]),
    ('j', [(5, 3, 1.0), (6, 2, -1.0), (7, 1, 1.0)]),
    ('k', [(5, 4, 1.0), (6, 1, -1.0), (7, 2, -1.0)]),
]
QUATERNION_COMPONENTS = ('real', 'i', 'j', 'k')


def relation_residuals(matrix: np.ndarray) -> Dict[str, float]:
    """Value of each g2 relation on a 7 x 7 (possibly stacked) matrix."""
    matrix = np.asarray(matrix)
    out = {}
    for name, terms in G2_RELATIONS:
        out[name] = sum(c * matrix[..., i - 1, j - 1] for i, j, c in terms)
    return out


def g2rel_residual(matrix: np.ndarray) -> float:
    """Largest g2 relation violation, including the skew part."""
    matrix = np.asarray(matrix)
    skew = np.max(np.abs(matrix + np.swapaxes(matrix, -1, -2)))
    rel = max(np.max(np.abs(v)) for v in relation_residuals(matrix).values())
    return float(max(skew, rel))


def quaternion_residual(beta: np.ndarray) -> Dict[str, float]:
    """Components of i*b5 + j*b6 + k*b7 for the 3 x 4 block beta."""
    beta = np.asarray(beta, dtype=float)
    b5, b6, b7 = beta
    return {
        'real': b5[0] + b6[3] - b7[2],
        'i': b5[1] + b6[2] + b7[3],
        'j': b5[2] - b6[1] + b7[0],
        'k': b5[3] - b6[0] - b7[1],
    }


def sigma_plus(theta: np.ndarray) -> np.ndarray:
    """Induced rotation of V+ = span(e5, e6, e7) for theta in so(4)."""
    t = np.asarray(theta, dtype=float)
    s56 = t[0, 3] + t[1, 2]
    s75 = t[0, 2] - t[1, 3]
    s67 = t[0, 1] + t[2, 3]
    return np.array([
        [0.0, s56, -s75],
        [-s56, 0.0, s67],
        [s75, -s67, 0.0],
    ])


@dataclass(frozen=True)
class G2AlgebraElement:
    """Element of g2 in its (theta, beta) presentation."""
    theta: np.ndarray
    beta: np.ndarray

    @property
    def matrix7(self) -> np.ndarray:
        m = np.zeros((7, 7))
        m[:4, :4] = self.theta
        m[4:, :4] = self.beta
        m[:4, 4:] = -self.beta.T
        m[4:, 4:] = sigma_plus(self.theta)
        return m

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, tol: Optional[float] = None) -> 'G2AlgebraElement':
        """View a 7 x 7 matrix as a g2 element, checking all relations."""
        tol = settings.tolerances.lie if tol is None else tol
        matrix = np.asarray(matrix, dtype=float)
        if matrix.shape != (7, 7):
            raise InputError(f"expected a 7x7 matrix, got {matrix.shape}")
        skew = float(np.max(np.abs(matrix + matrix.T)))
        if skew > tol:
            raise InputError(f"matrix is not skew (residual {skew:.3e})")
        for name, value in relation_residuals(matrix).items():
            if abs(value) > tol:
                raise RelationError(name, float(abs(value)))
        return cls(theta=matrix[:4, :4].copy(), beta=matrix[4:, :4].copy())

    def __add__(self, other: 'G2AlgebraElement') -> 'G2AlgebraElement':
        return G2AlgebraElement(self.theta + other.theta, self.beta + other.beta)

    def __mul__(self, scalar: float) -> 'G2AlgebraElement':
        return G2AlgebraElement(scalar * self.theta, scalar * self.beta)

    __rmul__ = __mul__

    def act(self, x: np.ndarray) -> np.ndarray:
        """a.x for column vectors x (a.e_i = e_j m_ji)."""
        return self.matrix7 @ x


def embed(theta: np.ndarray, beta: np.ndarray, tol: Optional[float] = None) -> G2AlgebraElement:
    """Assemble a g2 element from theta in so(4) and an admissible beta."""
    tol = settings.tolerances.lie if tol is None else tol
    theta = np.asarray(theta, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if theta.shape != (4, 4) or beta.shape != (3, 4):
        raise InputError(f"theta must be 4x4 and beta 3x4, got {theta.shape} and {beta.shape}")
    skew = float(np.max(np.abs(theta + theta.T)))
    if skew > tol:
        raise InputError(f"theta is not skew (residual {skew:.3e})")
    for name, value in quaternion_residual(beta).items():
        if abs(value) > tol:
            raise RelationError(name, float(abs(value)))
    return G2AlgebraElement(theta=theta, beta=beta)


def rotation_generator(i: int, j: int, dim: int = 4) -> np.ndarray:
    """E_ji - E_ij (1-based): rotates e_i towards e_j."""
    m = np.zeros((dim, dim))
    m[j - 1, i - 1] = 1.0
    m[i - 1, j - 1] = -1.0
    return m


def so7_skew_basis() -> List[np.ndarray]:
    """The 21 generators E_ji - E_ij, i < j."""
    return [rotation_generator(i, j, 7) for i in range(1, 8) for j in range(i + 1, 8)]


def constraint_matrix() -> np.ndarray:
    """The 7 x 21 linear map so(7) -> R^7 whose kernel is g2."""
    basis = so7_skew_basis()
    rows = []
    for _, terms in G2_RELATIONS:
        rows.append([sum(c * b[i - 1, j - 1] for i, j, c in terms) for b in basis])
    return np.array(rows)


@lru_cache(maxsize=1)
def _basis_cached():
    block = []
    for i in range(1, 5):
        for j in range(i + 1, 5):
            block.append(G2AlgebraElement(theta=rotation_generator(i, j), beta=np.zeros((3, 4))))

    # beta-space: kernel of the four quaternion relations on the 12 entries
    relation = np.array([
        [quaternion_residual(v.reshape(3, 4))[name] for v in np.eye(12)]
        for name in QUATERNION_COMPONENTS
    ])
    kernel = null_space(relation)
    off = [G2AlgebraElement(theta=np.zeros((4, 4)), beta=kernel[:, c].reshape(3, 4))
           for c in range(kernel.shape[1])]
    return tuple(block), tuple(off)


def g2_basis() -> List[G2AlgebraElement]:
    """14 elements: six so(4) generators followed by eight beta-space elements."""
    block, off = _basis_cached()
    return list(block) + list(off)


def g2_basis_split():
    block, off = _basis_cached()
    return list(block), list(off)


def _coords(matrix: np.ndarray) -> np.ndarray:
    stack = np.array([b.matrix7.ravel() for b in g2_basis()]).T
    coords, *_ = np.linalg.lstsq(stack, matrix.ravel(), rcond=None)
    return coords


def bracket(a: G2AlgebraElement, b: G2AlgebraElement, tol: Optional[float] = None) -> G2AlgebraElement:
    """Matrix commutator, checked to stay in g2."""
    tol = settings.tolerances.lie if tol is None else tol
    ma, mb = a.matrix7, b.matrix7
    comm = ma @ mb - mb @ ma
    scale = max(1.0, float(np.max(np.abs(ma))) * float(np.max(np.abs(mb))))
    residual = g2rel_residual(comm)
    if residual > tol * scale:
        logger.error("bracket left g2", residual=residual)
        raise InternalConsistencyError(f"bracket left g2 (residual {residual:.3e})")
    return G2AlgebraElement(theta=comm[:4, :4].copy(), beta=comm[4:, :4].copy())


def phi_preservation_residual(a) -> float:
    """max |phi(a x, y, z) + phi(x, a y, z) + phi(x, y, a z)| over basis triples."""
    m = a.matrix7 if isinstance(a, G2AlgebraElement) else np.asarray(a, dtype=float)
    t = PHI_TENSOR
    lie = (np.einsum('ljk,li->ijk', t, m)
           + np.einsum('ilk,lj->ijk', t, m)
           + np.einsum('ijl,lk->ijk', t, m))
    return float(np.max(np.abs(lie)))


def structure_constants() -> np.ndarray:
    """c[a, b, c] with [X_a, X_b] = sum_c c[a, b, c] X_c in the g2_basis."""
    basis = g2_basis()
    n = len(basis)
    c = np.zeros((n, n, n))
    for a in range(n):
        for b in range(n):
            ma, mb = basis[a].matrix7, basis[b].matrix7
            c[a, b] = _coords(ma @ mb - mb @ ma)
    return c


def killing_form() -> np.ndarray:
    """B(X_a, X_b) = tr(ad X_a ad X_b) on the g2_basis."""
    c = structure_constants()
    # ad(X_a)[k, b] = c[a, b, k]
    ad = np.transpose(c, (0, 2, 1))
    return np.einsum('aij,bji->ab', ad, ad)


def random_element(rng: np.random.Generator, scale: float = 1.0) -> G2AlgebraElement:
    """Gaussian combination of the basis."""
    coeffs = scale * rng.standard_normal(14)
    out = G2AlgebraElement(np.zeros((4, 4)), np.zeros((3, 4)))
    for c, b in zip(coeffs, g2_basis()):
        out = out + c * b
    return out
