"""
Small numerical helpers shared by the geometry modules.
"""
from typing import Callable, Sequence

import numpy as np

# Central-difference stencils: offsets and weights (divided by step).
_STENCILS = {
    2: (np.array([-1, 1]), np.array([-0.5, 0.5])),
    4: (np.array([-2, -1, 1, 2]), np.array([1.0, -8.0, 8.0, -1.0]) / 12.0),
}


def stencil_reach(order: int) -> int:
    """Number of nodes a central stencil of this order needs on each side."""
    return int(np.max(np.abs(_STENCILS[order][0])))


def grid_derivative(values: np.ndarray, index: Sequence[int], axis: int, step: float,
                    order: int = 2) -> np.ndarray:
    """Central difference of a sampled field along one grid axis at one node.

    `values` has the grid axes first, followed by the value shape.
    """
    offsets, weights = _STENCILS[order]
    result = 0.0
    for offset, weight in zip(offsets, weights):
        idx = list(index)
        idx[axis] += int(offset)
        result = result + weight * values[tuple(idx)]
    return result / step


def map_derivative(func: Callable[[np.ndarray], np.ndarray], point: np.ndarray, axis: int,
                   step: float, order: int = 2) -> np.ndarray:
    """Central difference of a closed-form map along one coordinate."""
    offsets, weights = _STENCILS[order]
    point = np.asarray(point, dtype=float)
    result = 0.0
    for offset, weight in zip(offsets, weights):
        shifted = point.copy()
        shifted[axis] += offset * step
        result = result + weight * np.asarray(func(shifted))
    return result / step

