from typing import Mapping

import numpy as np

from src.distributions.families import (
    BCCG,
    FAMILIES,
    ROLE_ORDER,
    DistributionFamily,
    FamilyId,
    Gamma,
    LogNormal,
    LogT,
    Normal,
    ParameterVector,
    Role,
    bccg_z,
    get_family,
)
from src.distributions.links import Identity, Link, Log, get_link
from src.distributions.residuals import density_mass, ks_statistic, quantile_residuals, worm_pairs
from src.errors import SupportViolation


def log_density(family: DistributionFamily, y, params: Mapping[str, np.ndarray]) -> np.ndarray:
    """Log-density of ``y`` under ``family``; raises on support or scale violations."""
    y_arr = np.asarray(y, dtype=float)
    try:
        family.check_support(y_arr)
    except ValueError as exc:
        raise SupportViolation(str(exc)) from None
    family.check_params(params)
    out = family.logpdf(y_arr, params)
    return out if np.ndim(out) else float(out)


def apply_link(family: DistributionFamily, role: str, eta):
    """Natural-scale parameter from the linear predictor (inverse link)."""
    return family.links[role].inverse(eta)


def invert_link(family: DistributionFamily, role: str, theta):
    """Linear predictor from the natural-scale parameter (the link itself)."""
    return family.links[role].link(theta)


__all__ = [
    "BCCG",
    "FAMILIES",
    "ROLE_ORDER",
    "DistributionFamily",
    "FamilyId",
    "Gamma",
    "Identity",
    "Link",
    "Log",
    "LogNormal",
    "LogT",
    "Normal",
    "ParameterVector",
    "Role",
    "apply_link",
    "bccg_z",
    "density_mass",
    "get_family",
    "get_link",
    "invert_link",
    "ks_statistic",
    "log_density",
    "quantile_residuals",
    "worm_pairs",
]
