"""B-spline, P-spline and cyclic cubic spline bases."""

import logging
from typing import Optional, Tuple

import numpy as np

from src.errors import DomainError

logger = logging.getLogger(__name__)

_RANGE_TOL = 1e-10


def _clamped_knots(knots: np.ndarray, degree: int) -> np.ndarray:
    return np.concatenate(
        (np.repeat(knots[0], degree), knots, np.repeat(knots[-1], degree))
    )


def bspline_design(t, knots, degree: int) -> np.ndarray:
    """Evaluate a clamped B-spline basis with the Cox-de Boor recursion.

    ``knots`` are the breakpoints; the boundary knots are repeated ``degree``
    times, giving ``len(knots) + degree - 1`` basis functions. The last
    breakpoint belongs to the final interval, so rows sum to one on the whole
    closed range.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    knots = np.asarray(knots, dtype=float)
    if degree < 0:
        raise DomainError("degree must be >= 0")
    if knots.ndim != 1 or len(knots) < 2 or np.any(np.diff(knots) <= 0):
        raise DomainError("knots must be strictly increasing with at least two entries")
    if np.any(t < knots[0] - _RANGE_TOL) or np.any(t > knots[-1] + _RANGE_TOL):
        raise DomainError(f"t must lie in [{knots[0]}, {knots[-1]}]")
    t = np.clip(t, knots[0], knots[-1])

    augmented = _clamped_knots(knots, degree)
    interval = np.clip(np.searchsorted(knots, t, side="right") - 1, 0, len(knots) - 2)
    basis = np.zeros((len(t), len(augmented) - 1))
    basis[np.arange(len(t)), interval + degree] = 1.0

    for k in range(1, degree + 1):
        updated = np.zeros((len(t), len(augmented) - 1 - k))
        for i in range(updated.shape[1]):
            left_span = augmented[i + k] - augmented[i]
            right_span = augmented[i + k + 1] - augmented[i + 1]
            if left_span > 0:
                updated[:, i] += (t - augmented[i]) / left_span * basis[:, i]
            if right_span > 0:
                updated[:, i] += (augmented[i + k + 1] - t) / right_span * basis[:, i + 1]
        basis = updated
    return basis


def pspline_penalty(d: int, order: int) -> np.ndarray:
    """Difference penalty D^T D of the given order for ``d`` coefficients."""
    if order < 1:
        raise DomainError("penalty order must be >= 1")
    if d <= order:
        raise DomainError(f"need more coefficients ({d}) than the penalty order ({order})")
    diff = np.diff(np.eye(d), n=order, axis=0)
    return diff.T @ diff


def equally_spaced_knots(lower: float, upper: float, num_knots: int) -> np.ndarray:
    if upper <= lower:
        upper = lower + 1.0
    return np.linspace(lower, upper, num_knots)


def _cardinal_cubic(u: np.ndarray) -> np.ndarray:
    """Uniform cubic B-spline supported on [0, 4)."""
    out = np.zeros_like(u)
    piece = np.floor(u).astype(int)
    for j, poly in enumerate(
        (
            lambda s: s**3,
            lambda s: -3 * s**3 + 12 * s**2 - 12 * s + 4,
            lambda s: 3 * s**3 - 24 * s**2 + 60 * s - 44,
            lambda s: (4 - s) ** 3,
        )
    ):
        mask = piece == j
        out[mask] = poly(u[mask]) / 6.0
    return out


def cyclic_cubic_design(
    x, period: float, num_knots: Optional[int] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """Periodic cubic B-spline basis on [0, period) and its cyclic penalty.

    The knots are equally spaced and wrap around, so every basis function is
    periodic and twice continuously differentiable across the boundary. The
    penalty is the second-order difference penalty taken around the circle.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if period <= 0:
        raise DomainError("period must be positive")
    if np.any(x < 0) or np.any(x >= period):
        raise DomainError(f"x must lie in [0, {period})")
    k = int(num_knots) if num_knots is not None else int(round(period))
    if k < 4:
        raise DomainError("cyclic cubic splines need at least 4 knots")

    spacing = period / k
    scaled = x / spacing
    design = np.empty((len(x), k))
    for j in range(k):
        design[:, j] = _cardinal_cubic(np.mod(scaled - j + 2.0, k))

    cyclic_diff = np.zeros((k, k))
    for i in range(k):
        cyclic_diff[i, i] = 1.0
        cyclic_diff[i, (i + 1) % k] = -2.0
        cyclic_diff[i, (i + 2) % k] = 1.0
    return design, cyclic_diff.T @ cyclic_diff
