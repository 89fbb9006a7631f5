import logging
from typing import Iterable, Mapping, Tuple

import numpy as np

from src.distributions.families import DistributionFamily
from src.errors import DomainError

logger = logging.getLogger(__name__)

MIN_DRAWS = 10_000

Distribution = Tuple[DistributionFamily, Mapping[str, float]]


def kl_divergence_oracle(
    p: Distribution,
    q: Distribution,
    n_mc: int = 100_000,
    seed: int = 0,
) -> Tuple[float, float]:
    """Monte-Carlo KL(P || Q) from draws of P, with its standard error.

    Returns ``inf`` when Q puts no density on a draw from P.
    """
    if n_mc < MIN_DRAWS:
        raise DomainError(f"n_mc must be >= {MIN_DRAWS}")
    p_family, p_params = p
    q_family, q_params = q
    rng = np.random.default_rng(seed)
    draws = p_family.sample(p_params, rng, size=n_mc)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_p = p_family.logpdf(draws, p_params)
        log_q = q_family.logpdf(draws, q_params)
    if q_family.positive_support:
        log_q = np.where(draws > 0, log_q, -np.inf)
    ratio = log_p - log_q
    if np.any(np.isinf(ratio)) or np.any(np.isnan(ratio)):
        return float("inf"), float("nan")
    return float(ratio.mean()), float(ratio.std(ddof=1) / np.sqrt(n_mc))


def mean_kl_divergence(
    pairs: Iterable[Tuple[Distribution, Distribution]],
    n_mc: int = 100_000,
    seed: int = 0,
) -> float:
    """Average of per-series KL divergences, the relative loss over a collection."""
    estimates = [
        kl_divergence_oracle(p, q, n_mc=n_mc, seed=seed + i)[0]
        for i, (p, q) in enumerate(pairs)
    ]
    if not estimates:
        raise DomainError("mean_kl_divergence needs at least one pair")
    return float(np.mean(estimates))
