"""Candidate pulse and step locations for the event regressors."""

import logging
from collections import deque
from typing import List, Optional, Tuple

import numpy as np

from src.config import settings
from src.errors import InsufficientData

logger = logging.getLogger(__name__)

MAD_SCALE = 1.4826
MIN_EVENT_POINTS = 20


def _robust_scale(values: np.ndarray, reference: float) -> Tuple[float, float]:
    centre = float(np.median(values))
    mad = MAD_SCALE * float(np.median(np.abs(values - centre)))
    # MAD is zero on constant stretches
    eps = 1e-9 * (1.0 + abs(reference))
    return centre, max(mad, eps)


def _pulse_positions(values: np.ndarray, z_threshold: float) -> List[int]:
    diffs = np.diff(values)
    centre, scale = _robust_scale(diffs, float(np.median(values)))
    z = (diffs - centre) / scale
    positions = []
    for t in range(1, len(values)):
        z_in = z[t - 1]
        if abs(z_in) <= z_threshold:
            continue
        if t == len(values) - 1:
            positions.append(t)
            continue
        z_out = z[t]
        if abs(z_out) > z_threshold and np.sign(z_out) != np.sign(z_in):
            positions.append(t)
    return positions


def _remove_pulses(values: np.ndarray, positions: List[int]) -> np.ndarray:
    cleaned = values.copy()
    for t in positions:
        cleaned[t] = cleaned[t - 1]
    return cleaned


def _deseasonalize(values: np.ndarray, period: int) -> np.ndarray:
    phase = np.arange(len(values)) % period
    profile = np.array([np.median(values[phase == p]) for p in range(period)])
    return values - profile[phase] + float(np.median(values))


def _segment_sse(cumsum: np.ndarray, cumsum_sq: np.ndarray, start: int, end: int) -> float:
    n = end - start
    total = cumsum[end] - cumsum[start]
    return float(cumsum_sq[end] - cumsum_sq[start] - total**2 / n)


def _binary_segmentation(
    values: np.ndarray,
    penalty: float,
    max_changepoints: int,
    min_segment: int,
    min_shift: float,
) -> List[int]:
    cumsum = np.concatenate(([0.0], np.cumsum(values)))
    cumsum_sq = np.concatenate(([0.0], np.cumsum(values**2)))
    changepoints: List[int] = []
    segments = deque([(0, len(values))])
    while segments and len(changepoints) < max_changepoints:
        start, end = segments.popleft()
        if end - start < 2 * min_segment:
            continue
        whole = _segment_sse(cumsum, cumsum_sq, start, end)
        best_gain, best_split = -np.inf, None
        for split in range(start + min_segment, end - min_segment + 1):
            gain = whole - _segment_sse(cumsum, cumsum_sq, start, split) - _segment_sse(
                cumsum, cumsum_sq, split, end
            )
            if gain > best_gain:
                best_gain, best_split = gain, split
        if best_split is None or best_gain <= penalty:
            continue
        left = (cumsum[best_split] - cumsum[start]) / (best_split - start)
        right = (cumsum[end] - cumsum[best_split]) / (end - best_split)
        if abs(right - left) <= min_shift:
            continue
        changepoints.append(best_split)
        segments.append((start, best_split))
        segments.append((best_split, end))
    return sorted(changepoints)


def detect_candidate_events(
    y,
    z_threshold: Optional[float] = None,
    max_changepoints: Optional[int] = None,
    min_relative_shift: Optional[float] = None,
    min_segment: Optional[int] = None,
    period: Optional[int] = None,
) -> Tuple[List[int], List[int]]:
    """Propose pulse times and step changepoints for one series.

    Pulses are points whose incoming and outgoing first differences are both
    extreme (robust z-score above ``z_threshold``) with opposite signs; a
    jump into the final observation also counts. Steps come from a binary
    segmentation of the pulse-cleaned series under a BIC penalty, optionally
    after removing a per-phase median profile of length ``period``.

    Returned indices refer to positions in ``y`` (missing values are skipped).
    """
    z_threshold = settings.PULSE_Z_THRESHOLD if z_threshold is None else z_threshold
    max_changepoints = settings.MAX_CHANGEPOINTS if max_changepoints is None else max_changepoints
    min_relative_shift = settings.STEP_MIN_SHIFT if min_relative_shift is None else min_relative_shift
    min_segment = settings.STEP_MIN_SEGMENT if min_segment is None else min_segment

    y = np.asarray(y, dtype=float)
    observed = np.flatnonzero(~np.isnan(y))
    if len(observed) < MIN_EVENT_POINTS:
        raise InsufficientData(
            f"event detection needs {MIN_EVENT_POINTS} observations, got {len(observed)}"
        )
    values = y[observed]

    pulse_positions = _pulse_positions(values, z_threshold)
    cleaned = _remove_pulses(values, pulse_positions)
    if period is not None and len(cleaned) >= 2 * period:
        cleaned = _deseasonalize(cleaned, period)

    _, diff_scale = _robust_scale(np.diff(cleaned), float(np.median(cleaned)))
    noise_var = (diff_scale / np.sqrt(2.0)) ** 2
    penalty = 2.0 * np.log(len(cleaned)) * noise_var
    min_shift = min_relative_shift * abs(float(np.median(cleaned)))
    step_positions = _binary_segmentation(
        cleaned, penalty, max_changepoints, min_segment, min_shift
    )

    pulses = [int(observed[p]) for p in pulse_positions]
    steps = [int(observed[s]) for s in step_positions]
    logger.debug("candidate events: pulses=%s steps=%s", pulses, steps)
    return pulses, steps
