from typing import Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from src.errors import DomainError
from src.gamlss.model import FittedModel


def delta(models_for_series: Sequence[FittedModel]) -> np.ndarray:
    """Penalized NLL of each model minus the smallest one in the list."""
    if len(models_for_series) == 0:
        raise DomainError("delta needs at least one model")
    criteria = {m.criterion for m in models_for_series}
    if len(criteria) > 1:
        raise DomainError(f"models mix criteria {sorted(criteria)}")
    values = np.array([m.penalized_nll for m in models_for_series], dtype=float)
    if not np.all(np.isfinite(values)):
        raise DomainError("penalized NLL must be finite")
    return values - values.min()


def akaike_weights(deltas) -> np.ndarray:
    """exp(-delta/2), normalized with a log-sum-exp shift."""
    log_terms = -0.5 * np.asarray(deltas, dtype=float)
    return np.exp(log_terms - logsumexp(log_terms))


def series_score(weights, null_membership) -> Tuple[float, float]:
    """Anomaly score pi_y (weight on null models) and alternative score 1 - pi_y."""
    weights = np.asarray(weights, dtype=float)
    mask = np.asarray(null_membership, dtype=bool)
    if weights.shape != mask.shape:
        raise DomainError("weights and membership flags differ in length")
    pi = float(np.clip(np.sum(weights[mask]), 0.0, 1.0))
    return pi, 1.0 - pi
