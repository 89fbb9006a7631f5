"""Basis-function generators for synthetic paths.

Every generator accepts either an integer seed or a ``numpy`` Generator and
is deterministic given it.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Union

import numpy as np

from src.distributions.families import get_family
from src.errors import DomainError
from src.series import TimeSeriesSample

logger = logging.getLogger(__name__)

Seed = Union[int, np.random.Generator, None]

DAILY_WEIGHTS = np.array([0.27, 0.25, 0.24, 0.21, 0.12, -0.52, -0.57])
HOURLY_SIN = (0.1, -0.2)
HOURLY_COS = (-0.5, -0.2)
DAYS_PER_WEEK = 7
HOURS_PER_DAY = 24
AR_BURN_IN = 100


def _rng(seed: Seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def gen_local_level(n: int, initial_level: float, alpha: float, sigma: float, seed: Seed = None) -> np.ndarray:
    """L_t = L_{t-1} + alpha * eps_t for t = 1..n."""
    if sigma < 0:
        raise DomainError("sigma must be >= 0")
    eps = _rng(seed).normal(0.0, 1.0, n) * sigma
    return initial_level + alpha * np.cumsum(eps)


def initial_hourly_profile(initial_level: float) -> np.ndarray:
    hours = np.arange(HOURS_PER_DAY)
    profile = np.zeros(HOURS_PER_DAY)
    for k, (c, d) in enumerate(zip(HOURLY_SIN, HOURLY_COS), start=1):
        angle = 2.0 * np.pi * k * hours / HOURS_PER_DAY
        profile += c * np.sin(angle) + d * np.cos(angle)
    return initial_level * profile


def gen_double_seasonal(
    n: int,
    initial_level: float,
    gamma1: float,
    gamma2: float,
    sigma: float = 1.0,
    seed: Seed = None,
) -> np.ndarray:
    """Day-of-week plus hour-of-day seasonal states, each a seasonal random walk.

    The value at hour t is the sum of the current day's and hour's states as
    they stood one cycle earlier; each state then takes its innovation.
    """
    if n < 2 * HOURS_PER_DAY:
        raise DomainError("double seasonal paths need n >= 48")
    rng = _rng(seed)
    daily = initial_level * DAILY_WEIGHTS.copy()
    hourly = initial_hourly_profile(initial_level)
    eps = rng.normal(0.0, 1.0, n) * sigma
    out = np.empty(n)
    for t in range(n):
        day = (t // HOURS_PER_DAY) % DAYS_PER_WEEK
        hour = t % HOURS_PER_DAY
        out[t] = daily[day] + hourly[hour]
        daily[day] += gamma1 * eps[t]
        hourly[hour] += gamma2 * eps[t]
    return out


def gen_random_pulse(n: int, rate: float, level, ratio: float, seed: Seed = None) -> np.ndarray:
    """x_t = L_t * ratio where a Bernoulli(rate) event fires, else 0."""
    if not 0 <= rate <= 1:
        raise DomainError("pulse rate must lie in [0, 1]")
    fires = _rng(seed).uniform(size=n) < rate
    return np.where(fires, np.broadcast_to(np.asarray(level, dtype=float), (n,)) * ratio, 0.0)


def gen_ar(n: int, phi: Sequence[float], sigma: float, seed: Seed = None, burn_in: int = AR_BURN_IN) -> np.ndarray:
    """Zero-initialized AR(P) recursion with the first ``burn_in`` draws dropped."""
    phi = np.asarray(phi, dtype=float)
    order = len(phi)
    eps = _rng(seed).normal(0.0, 1.0, n + burn_in) * sigma
    if order == 0:
        return eps[burn_in:]
    x = np.zeros(n + burn_in)
    for t in range(n + burn_in):
        past = x[max(0, t - order) : t][::-1]
        x[t] = float(phi[: len(past)] @ past) + eps[t]
    return x[burn_in:]


def gen_random_walk_drift(n: int, start: float, drift: float, sigma: float, seed: Seed = None) -> np.ndarray:
    """x_t = x_{t-1} + drift + eps_t for t = 1..n, starting from ``start``."""
    eps = _rng(seed).normal(0.0, 1.0, n) * sigma
    return start + np.cumsum(drift + eps)


def gen_linear_step(
    n: int,
    changepoints: Sequence[int],
    deltas: Sequence[float],
    sigma: float = 0.0,
    seed: Seed = None,
) -> np.ndarray:
    """Piecewise-constant sum of delta_i on [tau_i, tau_{i+1}) plus noise."""
    taus = [int(t) for t in changepoints]
    if len(taus) != len(deltas):
        raise DomainError("changepoints and deltas differ in length")
    if any(b <= a for a, b in zip(taus, taus[1:])):
        raise DomainError("changepoints must be increasing")
    out = _rng(seed).normal(0.0, 1.0, n) * sigma
    bounds = taus + [n]
    for i, (tau, delta) in enumerate(zip(taus, deltas)):
        out[tau : bounds[i + 1]] += delta
    return out


def gen_temporary_shift(
    n: int,
    initial_level: float,
    changepoints: Sequence[int],
    ratios: Sequence[float],
) -> np.ndarray:
    """Level path with three changepoints: up, back to base, then a final shift."""
    deltas = [(r - 1.0) * initial_level for r in ratios]
    return initial_level + gen_linear_step(n, changepoints, deltas)


@dataclass(frozen=True)
class PathComponents:
    """Natural-scale additive level, log-scale seasonal effect, scale and shape paths."""

    level: np.ndarray
    seasonal: Optional[np.ndarray] = None
    scale: Union[float, np.ndarray] = 0.1
    shape: Union[float, np.ndarray] = 0.0

    def location(self) -> np.ndarray:
        mu = np.asarray(self.level, dtype=float)
        if self.seasonal is not None:
            mu = mu * np.exp(self.seasonal)
        return mu


def compose_path(
    components: PathComponents,
    family: str = "BCCG",
    seed: Seed = None,
    series_id: str = "series",
    metadata: Optional[Dict] = None,
) -> TimeSeriesSample:
    """Draw y_t independently from ``family`` at the composed parameters."""
    mu = components.location()
    if np.any(~(mu > 0)):
        raise DomainError("composition produced a non-positive location")
    n = len(mu)
    dist = get_family(family)
    params = {
        "mu": mu,
        "sigma": np.broadcast_to(np.asarray(components.scale, dtype=float), (n,)).copy(),
        "nu": np.broadcast_to(np.asarray(components.shape, dtype=float), (n,)).copy(),
        "tau": np.full(n, 10.0),
    }
    params = {role: params[role] for role in dist.roles}
    dist.check_params(params)
    values = dist.sample(params, _rng(seed))
    return TimeSeriesSample(series_id, np.asarray(values, dtype=float), dict(metadata or {}))
