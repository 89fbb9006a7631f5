import logging
from typing import Mapping, Optional, Tuple

import numpy as np
from scipy import integrate, special, stats

from src.distributions.families import DistributionFamily
from src.errors import DomainError

logger = logging.getLogger(__name__)

_CDF_CLIP = 1e-16


def quantile_residuals(
    family: DistributionFamily,
    y: np.ndarray,
    params: Mapping[str, np.ndarray],
    rng_seed: Optional[int] = None,
    resolution: Optional[float] = None,
) -> np.ndarray:
    """Quantile residuals Phi^-1(F(y_t)) for the non-missing observations.

    With ``resolution`` the observations are read as recorded to that grain
    (counts, rounded readings), so tied values stand for an interval: u is
    drawn uniformly between F(y - h/2) and F(y + h/2) from a generator seeded
    with ``rng_seed``. Without it the residuals are deterministic.
    The CDF is divided by the density mass so that data drawn by ``sample``
    yields standard-normal residuals for BCCG as well.
    """
    y = np.asarray(y, dtype=float)
    observed = ~np.isnan(y)
    sub = {
        role: np.broadcast_to(np.asarray(v, dtype=float), y.shape)[observed]
        for role, v in params.items()
    }
    y_obs = y[observed]
    family.check_support(y_obs)
    family.check_params(sub)
    mass = family.total_mass(sub)
    if resolution is None:
        u = family.cdf(y_obs, sub) / mass
    else:
        if not resolution > 0:
            raise DomainError("resolution must be > 0")
        upper = family.cdf(y_obs + 0.5 * resolution, sub) / mass
        below = y_obs - 0.5 * resolution
        if family.positive_support:
            # the interval is cut at zero
            inside = below > 0
            lower = np.where(inside, family.cdf(np.where(inside, below, y_obs), sub) / mass, 0.0)
        else:
            lower = family.cdf(below, sub) / mass
        rng = np.random.default_rng(rng_seed)
        u = lower + (upper - lower) * rng.uniform(size=len(y_obs))
    return special.ndtri(np.clip(u, _CDF_CLIP, 1.0 - _CDF_CLIP))


def worm_pairs(residuals: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Detrended normal Q-Q coordinates: (theoretical quantile, sample - theoretical)."""
    r = np.sort(np.asarray(residuals, dtype=float))
    n = len(r)
    theoretical = special.ndtri((np.arange(1, n + 1) - 0.5) / n)
    return theoretical, r - theoretical


def ks_statistic(residuals: np.ndarray) -> float:
    if len(residuals) == 0:
        return float("nan")
    return float(stats.kstest(residuals, "norm").statistic)


def density_mass(
    family: DistributionFamily,
    params: Mapping[str, float],
    tol: float = 1e-8,
) -> float:
    """Integrate the density over its support by adaptive quadrature.

    Positive-support families are integrated over log(y) so the quadrature
    sees a smooth, unbounded integrand in both directions.
    """
    p = {role: np.asarray([float(v)]) for role, v in params.items()}
    family.check_params(p)
    if family.positive_support:

        def integrand(s: float) -> float:
            y = np.exp(s)
            return float(np.exp(family.logpdf(np.asarray([y]), p)[0]) * y)

        centre = float(np.log(p["mu"][0]))
    else:

        def integrand(s: float) -> float:
            return float(np.exp(family.logpdf(np.asarray([s]), p)[0]))

        centre = float(p["mu"][0])
    lower, _ = integrate.quad(integrand, -np.inf, centre, epsabs=tol, limit=200)
    upper, _ = integrate.quad(integrand, centre, np.inf, epsabs=tol, limit=200)
    mass = lower + upper
    logger.debug("density mass of %s at %s: %.10f", family.name, dict(params), mass)
    return mass
