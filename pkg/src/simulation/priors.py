"""Hyperparameter priors of the synthetic collections."""

from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator
from scipy import stats

Range = Tuple[float, float]


class SimConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_series: int = 200
    n_hours: int = 24 * 21
    seed: int = 0
    min_subspace_size: int = 10

    cv_log_location: float = float(np.log(0.05))
    cv_log_scale: float = 0.25
    cv_truncation_sd: float = 3.0
    level_log_mean: float = float(np.log(500.0))
    level_log_scale: float = 0.1
    level_range: Range = (350.0, 650.0)
    level_alpha: Range = (0.0, 0.15)
    seasonal_gamma: Range = (0.001, 0.1)
    pulse_rate: Range = (0.0, 0.01)
    pulse_ratio: Range = (3.0, 6.0)
    ar_poisson_location: float = 0.2
    ar_zero_probability: float = 0.75
    ar_phi: Range = (0.05, 0.25)
    drift_ratio: Range = (0.0001, 0.002)
    step_probability: float = 0.1
    step_tau: Tuple[int, int] = (50, 450)
    step_ratio_down: Range = (0.3, 0.7)
    step_ratio_up: Range = (1.4, 2.0)
    scale_constant: Range = (0.05, 0.25)
    shape_constant: Range = (-0.5, 0.2)

    # constant scale/shape splits of the normal series
    low_scale: Range = (0.05, 0.1)
    low_shape: Range = (-0.3, 0.2)
    mid_scale: Range = (0.1, 0.2)
    mid_shape: Range = (-0.5, -0.25)

    # anomaly ingredients
    anomaly_walk_sd: Range = (0.015, 0.03)
    anomaly_shape: Range = (-1.0, -0.5)
    anomaly_scale_growth: Range = (2.0, 4.0)
    anomaly_extra_probability: float = 0.5

    @field_validator("n_hours")
    @classmethod
    def _whole_days(cls, n_hours: int) -> int:
        if n_hours % 24 != 0 or n_hours < 48:
            raise ValueError("n_hours must be a multiple of 24 and at least 48")
        return n_hours


def uniform(rng: np.random.Generator, bounds: Range) -> float:
    return float(rng.uniform(bounds[0], bounds[1]))


def _truncated_lognormal(rng, log_location: float, log_scale: float, lower: float, upper: float) -> float:
    a = (np.log(lower) - log_location) / log_scale
    b = (np.log(upper) - log_location) / log_scale
    z = stats.truncnorm.rvs(a, b, random_state=rng)
    return float(np.exp(log_location + log_scale * z))


def sample_cv(rng: np.random.Generator, cfg: SimConfig) -> float:
    spread = cfg.cv_truncation_sd * cfg.cv_log_scale
    return _truncated_lognormal(
        rng,
        cfg.cv_log_location,
        cfg.cv_log_scale,
        float(np.exp(cfg.cv_log_location - spread)),
        float(np.exp(cfg.cv_log_location + spread)),
    )


def sample_initial_level(rng: np.random.Generator, cfg: SimConfig) -> float:
    return _truncated_lognormal(rng, cfg.level_log_mean, cfg.level_log_scale, *cfg.level_range)


def noise_sd(cv: float, initial_level: float) -> float:
    """sd of the innovations, from sigma^2 = cv * (1 + L0)."""
    return float(np.sqrt(cv * (1.0 + initial_level)))


def sample_ar_order(rng: np.random.Generator, cfg: SimConfig) -> int:
    """Zero-adjusted Poisson: P(0) fixed, positive part zero-truncated Poisson."""
    if rng.uniform() < cfg.ar_zero_probability:
        return 0
    lam = cfg.ar_poisson_location
    # inverse transform of the zero-truncated Poisson
    u = rng.uniform(stats.poisson.cdf(0, lam), 1.0)
    return int(max(1, stats.poisson.ppf(u, lam)))


def sample_ar_coefficients(rng: np.random.Generator, cfg: SimConfig, order: int) -> List[float]:
    return [uniform(rng, cfg.ar_phi) for _ in range(order)]


def sample_step(rng: np.random.Generator, cfg: SimConfig, force: bool = False, upward=None):
    """Changepoints and level ratios; no step with probability 1 - step_probability."""
    if not force and rng.uniform() >= cfg.step_probability:
        return [], []
    tau = int(rng.integers(cfg.step_tau[0], cfg.step_tau[1] + 1))
    if upward is None:
        upward = rng.uniform() < 0.5
    ratio = uniform(rng, cfg.step_ratio_up if upward else cfg.step_ratio_down)
    return [tau], [ratio]


def sample_scale_shape(rng: np.random.Generator, cfg: SimConfig, setting: str) -> Tuple[float, float]:
    if setting == "low":
        return uniform(rng, cfg.low_scale), uniform(rng, cfg.low_shape)
    if setting == "mid":
        return uniform(rng, cfg.mid_scale), uniform(rng, cfg.mid_shape)
    return uniform(rng, cfg.scale_constant), uniform(rng, cfg.shape_constant)
