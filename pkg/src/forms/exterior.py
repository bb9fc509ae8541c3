"""
Exterior algebra over R^7 with the G2 calibration forms and the induced cross product.

Forms are stored sparsely: a map from strictly increasing 1-based index tuples to
real coefficients. The orientation is nu = dx1^...^dx7.
"""
from dataclasses import dataclass, field
from itertools import combinations, permutations
from typing import Callable, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
import structlog

from config.settings import settings
from src.core.errors import ArityError, GradeError
from src.core.report import Report, default_provenance
from src.utils.metrics import metrics_collector
from src.utils.numerics import map_derivative
from src.utils.parallel import chunk_ranges, ordered_map

logger = structlog.get_logger(__name__)

DIM = 7
ZERO_CUTOFF = 1e-15

Vector7 = np.ndarray
Index = Tuple[int, ...]


def permutation_sign(seq: Sequence[int]) -> int:
    """Sign of the permutation sorting `seq` (0 if an index repeats)."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


def basis_vector(i: int) -> Vector7:
    """Standard basis vector epsilon_i, 1-based."""
    v = np.zeros(DIM)
    v[i - 1] = 1.0
    return v


@dataclass(frozen=True)
class Form:
    """Alternating form on R^7 with sparse coefficients."""
    grade: int
    coeffs: Dict[Index, float] = field(default_factory=dict)

    def __post_init__(self):
        if not 0 <= self.grade <= DIM:
            raise GradeError(f"grade {self.grade} outside 0..{DIM}")
        clean: Dict[Index, float] = {}
        for key, value in self.coeffs.items():
            key = tuple(int(k) for k in key)
            if len(key) != self.grade or any(a >= b for a, b in zip(key, key[1:])):
                raise GradeError(f"index tuple {key} is not strictly increasing of length {self.grade}")
            if key and (key[0] < 1 or key[-1] > DIM):
                raise GradeError(f"index tuple {key} leaves 1..{DIM}")
            if abs(value) > ZERO_CUTOFF:
                clean[key] = float(value)
        object.__setattr__(self, 'coeffs', clean)

    @classmethod
    def monomial(cls, indices: Iterable[int], coeff: float = 1.0) -> 'Form':
        """coeff * dx_{i1}^...^dx_{ip} for indices in any order."""
        indices = tuple(indices)
        sign = permutation_sign(indices)
        if sign == 0:
            return cls(len(indices))
        return cls(len(indices), {tuple(sorted(indices)): sign * coeff})

    @classmethod
    def scalar(cls, value: float) -> 'Form':
        return cls(0, {(): value})

    def __add__(self, other: 'Form') -> 'Form':
        if other.grade != self.grade:
            raise GradeError(f"cannot add grades {self.grade} and {other.grade}")
        coeffs = dict(self.coeffs)
        for key, value in other.coeffs.items():
            coeffs[key] = coeffs.get(key, 0.0) + value
        return Form(self.grade, coeffs)

    def __neg__(self) -> 'Form':
        return Form(self.grade, {k: -v for k, v in self.coeffs.items()})

    def __sub__(self, other: 'Form') -> 'Form':
        return self + (-other)

    def __mul__(self, scalar: float) -> 'Form':
        return Form(self.grade, {k: scalar * v for k, v in self.coeffs.items()})

    __rmul__ = __mul__

    def __xor__(self, other: 'Form') -> 'Form':
        return wedge(self, other)

    def distance(self, other: 'Form') -> float:
        """Max coefficient difference."""
        diff = self - other
        return max((abs(v) for v in diff.coeffs.values()), default=0.0)

    def coefficient(self, indices: Iterable[int]) -> float:
        indices = tuple(indices)
        sign = permutation_sign(indices)
        return sign * self.coeffs.get(tuple(sorted(indices)), 0.0)

    def __repr__(self) -> str:
        terms = " + ".join(f"{v:+g} dx{''.join(map(str, k))}" for k, v in sorted(self.coeffs.items()))
        return f"Form({self.grade}: {terms or '0'})"


def dx(*indices: int) -> Form:
    return Form.monomial(indices)


def wedge(a: Form, b: Form) -> Form:
    """Exterior product."""
    if a.grade + b.grade > DIM:
        raise GradeError(f"wedge of grades {a.grade} and {b.grade} exceeds {DIM}")
    coeffs: Dict[Index, float] = {}
    for ka, va in a.coeffs.items():
        for kb, vb in b.coeffs.items():
            sign = permutation_sign(ka + kb)
            if sign == 0:
                continue
            key = tuple(sorted(ka + kb))
            coeffs[key] = coeffs.get(key, 0.0) + sign * va * vb
    return Form(a.grade + b.grade, coeffs)


def hodge_star(a: Form) -> Form:
    """Hodge star for the Euclidean metric and orientation nu."""
    coeffs: Dict[Index, float] = {}
    full = set(range(1, DIM + 1))
    for key, value in a.coeffs.items():
        complement = tuple(sorted(full - set(key)))
        coeffs[complement] = permutation_sign(key + complement) * value
    return Form(DIM - a.grade, coeffs)


def evaluate(a: Form, vs: Sequence[Vector7]) -> float:
    """a(v1, ..., vp) by determinant expansion per monomial."""
    if len(vs) != a.grade:
        raise ArityError(f"form of grade {a.grade} evaluated on {len(vs)} vectors")
    if a.grade == 0:
        return a.coeffs.get((), 0.0)
    matrix = np.column_stack([np.asarray(v, dtype=float) for v in vs])
    return float(evaluate_batch(a, matrix[None])[0])


def evaluate_batch(a: Form, frames: np.ndarray) -> np.ndarray:
    """Evaluate on a stack of 7 x p matrices whose columns are the arguments."""
    frames = np.asarray(frames)
    if frames.shape[-1] != a.grade:
        raise ArityError(f"form of grade {a.grade} evaluated on {frames.shape[-1]} vectors")
    out = np.zeros(frames.shape[:-2], dtype=frames.dtype)
    for key, value in a.coeffs.items():
        rows = np.array(key) - 1
        out = out + value * np.linalg.det(frames[..., rows, :])
    return out


def interior(v: Vector7, a: Form) -> Form:
    """Contraction of v into the first slot."""
    if a.grade < 1:
        raise GradeError("interior product needs grade >= 1")
    coeffs: Dict[Index, float] = {}
    for key, value in a.coeffs.items():
        for pos, idx in enumerate(key):
            rest = key[:pos] + key[pos + 1:]
            coeffs[rest] = coeffs.get(rest, 0.0) + (-1) ** pos * v[idx - 1] * value
    return Form(a.grade - 1, coeffs)


def dense(a: Form) -> np.ndarray:
    """Fully antisymmetric coefficient tensor of shape (7,)*grade."""
    tensor = np.zeros((DIM,) * a.grade)
    for key, value in a.coeffs.items():
        for perm in permutations(range(a.grade)):
            idx = tuple(key[p] - 1 for p in perm)
            tensor[idx] = permutation_sign(perm) * value
    return tensor


# phi = dx567 - dx5^(dx12 + dx34) - dx6^(dx13 + dx42) - dx7^(dx14 + dx23)
PHI = (dx(5, 6, 7)
       - (dx(5) ^ (dx(1, 2) + dx(3, 4)))
       - (dx(6) ^ (dx(1, 3) + dx(4, 2)))
       - (dx(7) ^ (dx(1, 4) + dx(2, 3))))
STAR_PHI = hodge_star(PHI)
NU = dx(1, 2, 3, 4, 5, 6, 7)

PHI_TENSOR = dense(PHI)
STAR_PHI_TENSOR = dense(STAR_PHI)


def cross(x: Vector7, y: Vector7) -> Vector7:
    """Cross product defined by <x.y, z> = phi(x, y, z)."""
    return np.einsum('ijk,...i,...j->...k', PHI_TENSOR, x, y)


def phi(x, y, z):
    """phi on (possibly complex or stacked) vectors by multilinearity."""
    return np.einsum('ijk,...i,...j,...k->...', PHI_TENSOR, x, y, z)


def star_phi(a, b, c, d):
    return np.einsum('ijkl,...i,...j,...k,...l->...', STAR_PHI_TENSOR, a, b, c, d)


def pullback_derivative_residual(a: Form, func: Callable[[np.ndarray], np.ndarray],
                                 point: np.ndarray, step: float = 1e-3, order: int = 2) -> float:
    """|d(f* a)| at a point of R^(p+1), with f* a sampled by central differences.

    Forms with constant coefficients are closed, so the result measures the
    finite-difference error only.
    """
    p = a.grade
    point = np.asarray(point, dtype=float)
    if point.size != p + 1:
        raise ArityError(f"d of a pulled-back {p}-form needs a {p + 1}-dimensional domain")

    def component(k: int) -> Callable[[np.ndarray], float]:
        def value(q: np.ndarray) -> float:
            cols = [map_derivative(func, q, axis, step, order) for axis in range(p + 1) if axis != k]
            return evaluate(a, cols)
        return value

    total = 0.0
    for k in range(p + 1):
        total += (-1) ** k * map_derivative(component(k), point, k, step, order)
    return abs(float(total))


def _draw_frames(rng: np.random.Generator, count: int, grade: int, anchor: Optional[np.ndarray],
                 spread: float, max_redraws: int) -> Tuple[np.ndarray, int]:
    """Orthonormal 7 x grade frames by Gram-Schmidt (QR with positive R diagonal)."""
    def raw(m: int) -> np.ndarray:
        g = rng.standard_normal((m, DIM, grade))
        if anchor is not None:
            g = anchor[None] + spread * g
        return g

    frames = raw(count)
    redraws = 0
    while True:
        q, r = np.linalg.qr(frames)
        diag = np.diagonal(r, axis1=-2, axis2=-1)
        bad = np.min(np.abs(diag), axis=-1) < 1e-12
        if not bad.any() or redraws >= max_redraws:
            break
        frames[bad] = raw(int(bad.sum()))
        redraws += 1
    q = q * np.sign(diag)[:, None, :]
    return q, redraws


def comass_sample(form: Form, n: int, seed: int, anchor: Optional[np.ndarray] = None,
                  anchor_fraction: float = 0.5, tolerance: Optional[float] = None) -> Report:
    """Sample the form on n random orthonormal tuples and compare against 1.

    With an anchor (7 x p), a fraction of the draws is concentrated around it so
    the supremum near a calibrated plane is resolved. Chunks use independent
    counter-keyed streams, so the result does not depend on the thread count.
    """
    if n < 1:
        raise ArityError("comass sampling needs n >= 1")
    tol = tolerance if tolerance is not None else settings.tolerances.comass_slack
    chunk = settings.sampling.chunk_size
    spread = settings.sampling.anchor_spread
    n_anchor = int(round(n * anchor_fraction)) if anchor is not None else 0

    def run(chunk_range: range):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk_range.start // chunk,)))
        idx = np.arange(chunk_range.start, chunk_range.stop)
        near = idx < n_anchor
        values = np.empty(idx.size)
        redraws = 0
        if (~near).any():
            q, r = _draw_frames(rng, int((~near).sum()), form.grade, None, spread,
                                settings.sampling.max_redraws)
            values[~near] = evaluate_batch(form, q)
            redraws += r
        if near.any():
            q, r = _draw_frames(rng, int(near.sum()), form.grade, np.asarray(anchor, dtype=float),
                                spread, settings.sampling.max_redraws)
            values[near] = evaluate_batch(form, q)
            redraws += r
        return values, redraws

    results = ordered_map(run, chunk_ranges(n, chunk))
    values = np.concatenate([v for v, _ in results])
    redraws = sum(r for _, r in results)

    max_value = float(values.max())
    violations = int(np.sum(values > 1.0 + tol))
    metrics_collector.record_sampling(form.grade, n, max_value)
    logger.info("comass sampled", grade=form.grade, n=n, seed=seed, max_value=max_value,
                violations=violations)
    return Report(
        name=f"comass_grade{form.grade}",
        max_residual=max(0.0, max_value - 1.0),
        tolerance=tol,
        passed=violations == 0,
        mean_residual=float(np.mean(np.maximum(values - 1.0, 0.0))),
        n_nodes=n,
        details={'max_value': max_value, 'min_value': float(values.min()),
                 'violations': violations, 'redraws': redraws, 'anchored': n_anchor},
        provenance=default_provenance(seed=seed),
    )


def standard_frame_tuple(indices: Sequence[int]) -> np.ndarray:
    """7 x p matrix of standard basis columns, 1-based."""
    return np.column_stack([basis_vector(i) for i in indices])


def all_index_tuples(grade: int):
    return combinations(range(1, DIM + 1), grade)
