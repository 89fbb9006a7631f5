"""Location/scale/shape distribution families.

Every family works on natural-scale parameter arrays keyed by role
(``mu``, ``sigma``, ``nu``, ``tau``). Scores and expected information are
given with respect to the natural parameters, following the derivatives used
by the gamlss family implementations; ``working_quantities`` chains them
through the link to the linear predictor for the scoring updates.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, Mapping, Optional, Tuple

import numpy as np
from scipy import special, stats

from src.distributions.links import Link, get_link
from src.errors import DomainError

logger = logging.getLogger(__name__)

LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)

Params = Mapping[str, np.ndarray]


class Role(str, Enum):
    MU = "mu"
    SIGMA = "sigma"
    NU = "nu"
    TAU = "tau"


ROLE_ORDER = (Role.MU.value, Role.SIGMA.value, Role.NU.value, Role.TAU.value)


class FamilyId(str, Enum):
    NORMAL = "Normal"
    LOGNORMAL = "LogNormal"
    GAMMA = "Gamma"
    BCCG = "BCCG"
    LOGT = "LogT"


@dataclass(frozen=True)
class ParameterVector:
    """Time-indexed natural-scale parameters, one array per role."""

    values: Dict[str, np.ndarray]

    def __post_init__(self) -> None:
        lengths = {np.shape(v)[0] for v in self.values.values()}
        if len(lengths) > 1:
            raise DomainError(f"parameter vectors differ in length: {sorted(lengths)}")

    def __len__(self) -> int:
        return len(next(iter(self.values.values())))

    def __getitem__(self, role: str) -> np.ndarray:
        return self.values[role]

    def subset(self, mask: np.ndarray) -> "ParameterVector":
        return ParameterVector({r: v[mask] for r, v in self.values.items()})


def _as_arrays(params: Params) -> Dict[str, np.ndarray]:
    return {k: np.asarray(v, dtype=float) for k, v in params.items()}


@dataclass
class DistributionFamily:
    family_id: FamilyId
    roles: Tuple[str, ...]
    default_links: Dict[str, str]
    positive_support: bool = True
    # bounds on the linear predictor, applied by the fitter
    eta_bounds: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    links: Dict[str, Link] = field(init=False)

    def __post_init__(self) -> None:
        self.links = {role: get_link(self.default_links[role]) for role in self.roles}

    def with_links(self, overrides: Mapping[str, str]) -> "DistributionFamily":
        unknown = set(overrides) - set(self.roles)
        if unknown:
            raise DomainError(f"{self.family_id.value} has no roles {sorted(unknown)}")
        family = type(self)()
        family.links = {**self.links, **{r: get_link(n) for r, n in overrides.items()}}
        return family

    @property
    def name(self) -> str:
        return self.family_id.value

    # -- support -----------------------------------------------------------
    def check_support(self, y: np.ndarray) -> None:
        y = np.asarray(y, dtype=float)
        finite = y[~np.isnan(y)]
        if self.positive_support and np.any(finite <= 0):
            raise DomainError(f"{self.name} requires y > 0")
        if np.any(~np.isfinite(finite)):
            raise DomainError(f"{self.name} requires finite y")

    def check_params(self, params: Params) -> None:
        missing = [r for r in self.roles if r not in params]
        if missing:
            raise DomainError(f"{self.name} is missing parameters {missing}")
        if np.any(~(np.asarray(params["sigma"]) > 0)):
            raise DomainError("scale must be > 0")

    # -- densities ---------------------------------------------------------
    def logpdf(self, y: np.ndarray, params: Params) -> np.ndarray:
        raise NotImplementedError

    def cdf(self, y: np.ndarray, params: Params) -> np.ndarray:
        raise NotImplementedError

    def sample(self, params: Params, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
        raise NotImplementedError

    # -- scoring -----------------------------------------------------------
    def score(self, role: str, y: np.ndarray, params: Params) -> Optional[np.ndarray]:
        return None

    def expected_information(self, role: str, y: np.ndarray, params: Params) -> Optional[np.ndarray]:
        return None

    def working_quantities(
        self,
        role: str,
        y: np.ndarray,
        params: Dict[str, np.ndarray],
        eta: np.ndarray,
        weight_floor: float = 1e-10,
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Score ``u`` and Fisher weight ``w`` with respect to ``eta`` of ``role``.

        Closed forms are used when the family provides them, otherwise both
        are obtained by symmetric differencing of the log-density; an observed
        information that is not positive falls back to the squared score.
        """
        link = self.links[role]
        d1 = self.score(role, y, params)
        info = self.expected_information(role, y, params)
        if d1 is not None and info is not None:
            dtheta = link.dtheta_deta(eta)
            u = d1 * dtheta
            w = info * dtheta**2
        else:
            u, w = self._numeric_working_quantities(role, y, params, eta)
        w = np.where(np.isfinite(w), w, weight_floor)
        return u, np.maximum(w, weight_floor)

    def _numeric_working_quantities(self, role, y, params, eta):
        link = self.links[role]
        h = 1e-4 * np.maximum(1.0, np.abs(eta))

        def at(shift):
            shifted = dict(params)
            shifted[role] = link.inverse(eta + shift)
            return self.logpdf(y, shifted)

        lp, l0, lm = at(h), at(0.0), at(-h)
        u = (lp - lm) / (2.0 * h)
        d2 = (lp - 2.0 * l0 + lm) / h**2
        w = np.where(-d2 > 0, -d2, u**2)
        return u, w

    # -- starting values ---------------------------------------------------
    def neutral_value(self, role: str) -> float:
        return {"nu": 0.0, "tau": 10.0}.get(role, 1.0)

    def total_mass(self, params: Params) -> np.ndarray:
        """Mass of the density over its support (1 for normalized families)."""
        return np.ones_like(np.asarray(params["sigma"], dtype=float))


class Normal(DistributionFamily):
    def __init__(self) -> None:
        super().__init__(
            family_id=FamilyId.NORMAL,
            roles=("mu", "sigma"),
            default_links={"mu": "identity", "sigma": "log"},
            positive_support=False,
        )

    def logpdf(self, y, params):
        p = _as_arrays(params)
        return stats.norm.logpdf(y, loc=p["mu"], scale=p["sigma"])

    def cdf(self, y, params):
        p = _as_arrays(params)
        return special.ndtr((np.asarray(y) - p["mu"]) / p["sigma"])

    def sample(self, params, rng, size=None):
        p = _as_arrays(params)
        return rng.normal(p["mu"], p["sigma"], size=size)

    def score(self, role, y, params):
        mu, sigma = params["mu"], params["sigma"]
        if role == "mu":
            return (y - mu) / sigma**2
        return ((y - mu) ** 2 - sigma**2) / sigma**3

    def expected_information(self, role, y, params):
        sigma = params["sigma"]
        if role == "mu":
            return np.broadcast_to(1.0 / sigma**2, np.shape(y))
        return np.broadcast_to(2.0 / sigma**2, np.shape(y))


class LogNormal(DistributionFamily):
    """log(y) ~ N(log(mu), sigma); ``mu`` is the median."""

    def __init__(self) -> None:
        super().__init__(
            family_id=FamilyId.LOGNORMAL,
            roles=("mu", "sigma"),
            default_links={"mu": "log", "sigma": "log"},
        )

    def logpdf(self, y, params):
        p = _as_arrays(params)
        ly = np.log(y)
        return stats.norm.logpdf(ly, loc=np.log(p["mu"]), scale=p["sigma"]) - ly

    def cdf(self, y, params):
        p = _as_arrays(params)
        return special.ndtr((np.log(y) - np.log(p["mu"])) / p["sigma"])

    def sample(self, params, rng, size=None):
        p = _as_arrays(params)
        return np.exp(rng.normal(np.log(p["mu"]), p["sigma"], size=size))

    def score(self, role, y, params):
        mu, sigma = params["mu"], params["sigma"]
        e = np.log(y) - np.log(mu)
        if role == "mu":
            return e / (sigma**2 * mu)
        return (e**2 - sigma**2) / sigma**3

    def expected_information(self, role, y, params):
        mu, sigma = params["mu"], params["sigma"]
        if role == "mu":
            return np.broadcast_to(1.0 / (sigma**2 * mu**2), np.shape(y))
        return np.broadcast_to(2.0 / sigma**2, np.shape(y))


class Gamma(DistributionFamily):
    """Mean ``mu`` and coefficient of variation ``sigma`` (variance sigma^2 mu^2)."""

    def __init__(self) -> None:
        super().__init__(
            family_id=FamilyId.GAMMA,
            roles=("mu", "sigma"),
            default_links={"mu": "log", "sigma": "log"},
        )

    def check_params(self, params):
        super().check_params(params)
        if np.any(~(np.asarray(params["mu"]) > 0)):
            raise DomainError("Gamma requires mu > 0")

    def logpdf(self, y, params):
        p = _as_arrays(params)
        shape = 1.0 / p["sigma"] ** 2
        return stats.gamma.logpdf(y, a=shape, scale=p["mu"] / shape)

    def cdf(self, y, params):
        p = _as_arrays(params)
        shape = 1.0 / p["sigma"] ** 2
        return special.gammainc(shape, np.asarray(y) * shape / p["mu"])

    def sample(self, params, rng, size=None):
        p = _as_arrays(params)
        shape = 1.0 / p["sigma"] ** 2
        return rng.gamma(shape, p["mu"] / shape, size=size)

    def score(self, role, y, params):
        mu, sigma = params["mu"], params["sigma"]
        if role == "mu":
            return (y - mu) / (sigma**2 * mu**2)
        a = 1.0 / sigma**2
        return (2.0 / sigma**3) * (y / mu - np.log(y) + np.log(mu) + np.log(sigma**2) - 1.0 + special.digamma(a))

    def expected_information(self, role, y, params):
        mu, sigma = params["mu"], params["sigma"]
        if role == "mu":
            return np.broadcast_to(1.0 / (sigma**2 * mu**2), np.shape(y))
        a = 1.0 / sigma**2
        info = 4.0 * special.polygamma(1, a) / sigma**6 - 4.0 / sigma**4
        return np.broadcast_to(info, np.shape(y))


def bccg_z(y, mu, sigma, nu) -> np.ndarray:
    """Box-Cox z-variable; the nu == 0 branch is log(y/mu)/sigma."""
    log_ratio = np.log(y) - np.log(mu)
    nu_safe = np.where(nu == 0, 1.0, nu)
    z_power = np.expm1(nu * log_ratio) / (nu_safe * sigma)
    return np.where(nu == 0, log_ratio / sigma, z_power)


class BCCG(DistributionFamily):
    """Box-Cox Cole-Green density, without a truncation constant.

    The density integrates to Phi(1 / (sigma |nu|)) rather than 1 when
    ``nu != 0``; see ``density_mass``.
    """

    def __init__(self) -> None:
        super().__init__(
            family_id=FamilyId.BCCG,
            roles=("mu", "sigma", "nu"),
            default_links={"mu": "log", "sigma": "log", "nu": "identity"},
        )

    def check_params(self, params):
        super().check_params(params)
        if np.any(~(np.asarray(params["mu"]) > 0)):
            raise DomainError("BCCG requires mu > 0")

    def logpdf(self, y, params):
        p = _as_arrays(params)
        mu, sigma, nu = np.broadcast_arrays(p["mu"], p["sigma"], p["nu"])
        y = np.asarray(y, dtype=float)
        z = bccg_z(y, mu, sigma, nu)
        return -LOG_SQRT_2PI - np.log(sigma) + (nu - 1.0) * np.log(y) - nu * np.log(mu) - 0.5 * z**2

    def cdf(self, y, params):
        p = _as_arrays(params)
        mu, sigma, nu = np.broadcast_arrays(p["mu"], p["sigma"], p["nu"])
        z = bccg_z(np.asarray(y, dtype=float), mu, sigma, nu)
        nu_safe = np.where(nu > 0, nu, 1.0)
        lower = np.where(nu > 0, special.ndtr(-1.0 / (nu_safe * sigma)), 0.0)
        return special.ndtr(z) - lower

    def total_mass(self, params):
        p = _as_arrays(params)
        sigma, nu = np.broadcast_arrays(p["sigma"], p["nu"])
        abs_nu = np.abs(nu)
        safe = np.where(abs_nu > 0, abs_nu, 1.0)
        return np.where(abs_nu > 0, special.ndtr(1.0 / (sigma * safe)), 1.0)

    def sample(self, params, rng, size=None):
        p = _as_arrays(params)
        mu, sigma, nu = np.broadcast_arrays(p["mu"], p["sigma"], p["nu"])
        if size is not None and mu.ndim == 0:
            mu, sigma, nu = (np.full(size, v) for v in (mu, sigma, nu))
        nonzero = nu != 0
        nu_safe = np.where(nonzero, nu, 1.0)
        bound = -1.0 / (nu_safe * sigma)
        # keep 1 + nu*sigma*z > 0
        lo = np.where(nonzero & (nu > 0), special.ndtr(bound), 0.0)
        hi = np.where(nonzero & (nu < 0), special.ndtr(bound), 1.0)
        u = lo + (hi - lo) * rng.uniform(size=np.shape(mu))
        z = special.ndtri(np.clip(u, 1e-300, 1.0 - 1e-16))
        base = np.maximum(1.0 + nu * sigma * z, 1e-300)
        return np.where(
            nonzero,
            mu * np.exp(np.log(base) / nu_safe),
            mu * np.exp(sigma * z),
        )

    def score(self, role, y, params):
        mu, sigma, nu = params["mu"], params["sigma"], params["nu"]
        if role == "nu" and np.any(np.abs(nu) < 1e-6):
            return None
        z = bccg_z(y, mu, sigma, nu)
        if role == "mu":
            return (z / sigma + nu * (z**2 - 1.0)) / mu
        if role == "sigma":
            return (z**2 - 1.0) / sigma
        log_ratio = np.log(y) - np.log(mu)
        return (z / nu) * (z - log_ratio / sigma) - log_ratio * (z**2 - 1.0)

    def expected_information(self, role, y, params):
        mu, sigma, nu = params["mu"], params["sigma"], params["nu"]
        if role == "mu":
            info = (1.0 + 2.0 * nu**2 * sigma**2) / (mu**2 * sigma**2)
        elif role == "sigma":
            info = 2.0 / sigma**2
        else:
            if np.any(np.abs(nu) < 1e-6):
                return None
            info = 7.0 * sigma**2 / 4.0
        return np.broadcast_to(info, np.shape(y))


class LogT(DistributionFamily):
    """log(y) follows a Student-t with location log(mu), scale sigma, df tau."""

    def __init__(self) -> None:
        super().__init__(
            family_id=FamilyId.LOGT,
            roles=("mu", "sigma", "tau"),
            default_links={"mu": "log", "sigma": "log", "tau": "log"},
            eta_bounds={"tau": (np.log(0.5), np.log(1e5))},
        )

    def check_params(self, params):
        super().check_params(params)
        if np.any(~(np.asarray(params["tau"]) > 0)):
            raise DomainError("LogT requires tau > 0")

    def _standardize(self, y, params):
        return (np.log(y) - np.log(params["mu"])) / params["sigma"]

    def logpdf(self, y, params):
        p = _as_arrays(params)
        e = self._standardize(np.asarray(y, dtype=float), p)
        return stats.t.logpdf(e, df=p["tau"]) - np.log(p["sigma"]) - np.log(y)

    def cdf(self, y, params):
        p = _as_arrays(params)
        return special.stdtr(p["tau"], self._standardize(np.asarray(y, dtype=float), p))

    def sample(self, params, rng, size=None):
        p = _as_arrays(params)
        t = rng.standard_t(p["tau"], size=size)
        return np.exp(np.log(p["mu"]) + p["sigma"] * t)

    def score(self, role, y, params):
        mu, sigma, tau = params["mu"], params["sigma"], params["tau"]
        e = self._standardize(y, params)
        if role == "mu":
            return (tau + 1.0) * e / (sigma * (tau + e**2)) / mu
        if role == "sigma":
            return -1.0 / sigma + (tau + 1.0) * e**2 / (sigma * (tau + e**2))
        return 0.5 * (
            special.digamma((tau + 1.0) / 2.0)
            - special.digamma(tau / 2.0)
            - 1.0 / tau
            - np.log1p(e**2 / tau)
            + (tau + 1.0) * e**2 / (tau * (tau + e**2))
        )

    def expected_information(self, role, y, params):
        mu, sigma, tau = params["mu"], params["sigma"], params["tau"]
        if role == "mu":
            info = (tau + 1.0) / ((tau + 3.0) * sigma**2 * mu**2)
        elif role == "sigma":
            info = 2.0 * tau / ((tau + 3.0) * sigma**2)
        else:
            info = 0.25 * (special.polygamma(1, tau / 2.0) - special.polygamma(1, (tau + 1.0) / 2.0)) - (
                tau + 5.0
            ) / (2.0 * tau * (tau + 1.0) * (tau + 3.0))
        return np.broadcast_to(info, np.shape(y))

    def neutral_value(self, role):
        return 10.0 if role == "tau" else super().neutral_value(role)


FAMILIES: Dict[str, Callable[[], DistributionFamily]] = {
    FamilyId.NORMAL.value: Normal,
    FamilyId.LOGNORMAL.value: LogNormal,
    FamilyId.GAMMA.value: Gamma,
    FamilyId.BCCG.value: BCCG,
    FamilyId.LOGT.value: LogT,
}


def get_family(family_id: str, links: Optional[Mapping[str, str]] = None) -> DistributionFamily:
    try:
        family = FAMILIES[FamilyId(family_id).value]()
    except ValueError:
        raise DomainError(f"unknown distribution family {family_id!r}") from None
    return family.with_links(links) if links else family
