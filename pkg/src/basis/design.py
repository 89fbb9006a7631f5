from typing import Iterable, List, Sequence

import numpy as np

from src.errors import DomainError


def fourier_design(t, period: float, num_harmonics: int) -> np.ndarray:
    """Columns sin(2 pi k t / period), cos(2 pi k t / period) for k = 1..K, interleaved."""
    if num_harmonics < 1:
        raise DomainError("num_harmonics must be >= 1")
    if period <= 1:
        raise DomainError("period must be > 1")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    angle = 2.0 * np.pi * np.outer(t, np.arange(1, num_harmonics + 1)) / period
    design = np.empty((len(t), 2 * num_harmonics))
    design[:, 0::2] = np.sin(angle)
    design[:, 1::2] = np.cos(angle)
    return design


def _validated_indices(indices: Iterable[int], n: int, what: str) -> List[int]:
    values = [int(i) for i in indices]
    if len(set(values)) != len(values):
        raise DomainError(f"duplicate {what} indices: {values}")
    bad = [i for i in values if not 0 <= i < n]
    if bad:
        raise DomainError(f"{what} indices {bad} outside [0, {n})")
    return sorted(values)


def pulse_and_step_design(
    n: int,
    pulse_times: Sequence[int] = (),
    step_changepoints: Sequence[int] = (),
) -> np.ndarray:
    """0/1 indicator columns: one per pulse time, then one per step segment.

    The step column for changepoint tau_i covers [tau_i, tau_{i+1}) and the
    last one runs to the end of the grid.
    """
    pulses = _validated_indices(pulse_times, n, "pulse")
    steps = _validated_indices(step_changepoints, n, "step")
    design = np.zeros((n, len(pulses) + len(steps)))
    for column, t in enumerate(pulses):
        design[t, column] = 1.0
    bounds = steps + [n]
    for i, start in enumerate(steps):
        design[start : bounds[i + 1], len(pulses) + i] = 1.0
    return design


def lagged_response_design(eta_response: np.ndarray, order: int) -> np.ndarray:
    """Centered lagged copies of the link-scale response, one column per lag.

    Lags reaching before the start of the series, or onto a missing value,
    are set to zero (the centered mean).
    """
    if order < 1:
        raise DomainError("ar_order must be >= 1")
    z = np.asarray(eta_response, dtype=float)
    centered = z - np.nanmean(z)
    design = np.zeros((len(z), order))
    for lag in range(1, order + 1):
        design[lag:, lag - 1] = centered[:-lag]
    return np.nan_to_num(design, nan=0.0)
