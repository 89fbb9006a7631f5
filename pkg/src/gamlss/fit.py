"""Penalized-likelihood fitting of location/scale/shape models.

The fitter follows the RS scheme: every outer cycle updates the parameters in
the order mu, sigma, nu, tau. Each update forms the Fisher-scoring working
variate for one parameter and backfits its additive terms by penalized
weighted least squares, with step halving so the penalized log-likelihood
never decreases for fixed smoothing parameters.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import linalg

from src.basis.events import detect_candidate_events
from src.basis.terms import BasisRealization, RegressorMatrix, TermKind, realize_term
from src.distributions.families import ROLE_ORDER, DistributionFamily
from src.errors import InsufficientData, SingularSystem, SupportViolation
from src.gamlss.model import FittedModel, information_criterion
from src.gamlss.specs import FitConfig, ModelFamilySpec

logger = logging.getLogger(__name__)

MEDIAN_WINDOW = 25
GCV_FLAT_TOL = 1e-10


@dataclass
class _Term:
    realization: BasisRealization
    design: np.ndarray
    penalty: np.ndarray
    lam: float
    select: bool
    coef: np.ndarray = field(init=False)
    edf: float = 0.0

    def __post_init__(self) -> None:
        self.coef = np.zeros(self.design.shape[1])

    @property
    def fitted(self) -> np.ndarray:
        return self.design @ self.coef

    def penalty_value(self, coef: Optional[np.ndarray] = None) -> float:
        a = self.coef if coef is None else coef
        if self.lam == 0 or not np.any(self.penalty):
            return 0.0
        return float(self.lam * a @ self.penalty @ a)


@dataclass
class _SolveResult:
    coef: np.ndarray
    edf: float
    rescued: bool


def _solve_penalized(
    design: np.ndarray,
    w: np.ndarray,
    r: np.ndarray,
    penalty: np.ndarray,
    lam: float,
    ridge: float,
) -> _SolveResult:
    """Solve (B'WB + lam G) a = B'W r and return a with trace of the smoother."""
    btw = design.T * w
    gram = btw @ design
    lhs = gram + lam * penalty
    rhs = btw @ r
    try:
        factor = linalg.cho_factor(lhs)
        rescued = False
    except linalg.LinAlgError:
        scale = max(1.0, float(np.trace(lhs)) / lhs.shape[0])
        try:
            factor = linalg.cho_factor(lhs + ridge * scale * np.eye(lhs.shape[0]))
        except linalg.LinAlgError as exc:
            raise SingularSystem("penalized normal equations are singular") from exc
        rescued = True
    coef = linalg.cho_solve(factor, rhs)
    edf = float(np.trace(linalg.cho_solve(factor, gram)))
    return _SolveResult(coef, edf, rescued)


class _Fitter:
    def __init__(
        self,
        y: np.ndarray,
        X: RegressorMatrix,
        spec: ModelFamilySpec,
        cfg: FitConfig,
        events: Tuple[Sequence[int], Sequence[int]],
        ar_order: int,
    ) -> None:
        self.spec = spec
        self.cfg = cfg
        self.family: DistributionFamily = spec.family()
        self.observed = ~np.isnan(y)
        self.y_full = y
        self.y = y[self.observed]
        self.roles = [r for r in ROLE_ORDER if r in self.family.roles]
        self.ridge_rescued = False
        self.events = events
        self.ar_order = ar_order

        eta_response = None
        if ar_order > 0:
            with np.errstate(divide="ignore", invalid="ignore"):
                eta_response = np.where(
                    self.observed, self.family.links["mu"].link(np.where(self.observed, y, 1.0)), np.nan
                )

        self.full_designs: Dict[str, List[np.ndarray]] = {}
        self.terms: Dict[str, List[_Term]] = {}
        for role in self.roles:
            centered = spec.has_intercept(role)
            role_terms, role_full = [], []
            for term in spec.terms[role]:
                if term.kind == TermKind.AR and ar_order == 0:
                    continue
                realization = realize_term(
                    term,
                    X,
                    eta_response=eta_response,
                    events=events,
                    centered=centered,
                    ar_order=ar_order if term.kind == TermKind.AR else None,
                )
                fixed = term.lam if isinstance(term.lam, float) else None
                select = term.uses_gcv and cfg.gcv
                lam = 0.0 if not term.penalized else (fixed if fixed is not None else cfg.default_lambda)
                design = realization.fit_design
                role_full.append(design)
                role_terms.append(
                    _Term(realization, design[self.observed], realization.fit_penalty, lam, select)
                )
            self.terms[role] = role_terms
            self.full_designs[role] = role_full

        n_coef = sum(t.design.shape[1] for ts in self.terms.values() for t in ts)
        needed = max(cfg.min_observations, n_coef + 5)
        if len(self.y) < needed:
            raise InsufficientData(f"{spec.name} needs {needed} observations, got {len(self.y)}")
        self.eta: Dict[str, np.ndarray] = {}

    # -- objective ---------------------------------------------------------
    def params_from(self, eta: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
        return {role: self.family.links[role].inverse(eta[role]) for role in self.roles}

    def feasible(self, eta: Dict[str, np.ndarray]) -> bool:
        for role, (lo, hi) in self.family.eta_bounds.items():
            if role in eta and (np.any(eta[role] < lo) or np.any(eta[role] > hi)):
                return False
        return True

    def loglik(self, eta: Dict[str, np.ndarray]) -> float:
        if not self.feasible(eta):
            return -np.inf
        with np.errstate(all="ignore"):
            values = self.family.logpdf(self.y, self.params_from(eta))
        total = float(np.sum(values))
        return total if np.isfinite(total) else -np.inf

    def penalty(self, coefs: Optional[Dict[str, List[np.ndarray]]] = None) -> float:
        total = 0.0
        for role, role_terms in self.terms.items():
            for j, term in enumerate(role_terms):
                total += term.penalty_value(None if coefs is None else coefs[role][j])
        return total

    def objective(self, eta, coefs=None) -> float:
        return self.loglik(eta) - 0.5 * self.penalty(coefs)

    # -- initialization ----------------------------------------------------
    def initial_eta(self) -> Dict[str, np.ndarray]:
        family = self.family
        mu_link = family.links["mu"]
        running = (
            pd.Series(self.y)
            .rolling(MEDIAN_WINDOW, center=True, min_periods=1)
            .median()
            .to_numpy()
        )
        eta = {"mu": mu_link.link(running)}
        if family.positive_support:
            residual = np.log(self.y) - np.log(running)
            floor = 1e-4
        else:
            residual = self.y - running
            floor = 1e-6 * (1.0 + abs(float(np.median(self.y))))
        mad = 1.4826 * float(np.median(np.abs(residual - np.median(residual))))
        sigma = max(mad, floor)
        n = len(self.y)
        eta["sigma"] = np.full(n, float(family.links["sigma"].link(sigma)))
        for role in self.roles[2:]:
            eta[role] = np.full(n, float(family.links[role].link(family.neutral_value(role))))
        return eta

    def initialize(self) -> None:
        target = self.initial_eta()
        for role in self.roles:
            self.backfit(role, target[role], np.ones(len(self.y)), select=False)
            self.eta[role] = self.role_eta(role)

    # -- backfitting -------------------------------------------------------
    def role_eta(self, role: str) -> np.ndarray:
        return np.sum([t.fitted for t in self.terms[role]], axis=0)

    def saturated_deviance(self) -> float:
        """Global deviance with mu_t = y_t and the other parameters at their current values."""
        params = self.params_from(self.eta)
        with np.errstate(all="ignore"):
            values = self.family.logpdf(self.y, {**params, "mu": self.y})
        return -2.0 * float(np.sum(values))

    def _select_lambda(self, role: str, term: _Term, partial: np.ndarray, w: np.ndarray,
                       other_fit: np.ndarray) -> _SolveResult:
        """Grid search of n D / (n - gamma edf)^2 with D the global deviance of the candidate.

        D is measured from the saturated location fit, a constant across the
        grid, so it stays positive whatever the scale of the data.
        """
        n = len(self.y)
        other_edf = sum(t.edf for ts in self.terms.values() for t in ts if t is not term)
        saturated = self.saturated_deviance()
        scores, results = [], []
        for lam in self.cfg.lambda_grid:
            result = _solve_penalized(term.design, w, partial, term.penalty, lam, self.cfg.ridge)
            eta = {**self.eta, role: other_fit + term.design @ result.coef}
            deviance = -2.0 * self.loglik(eta) - saturated
            denom = n - self.cfg.gcv_gamma * (other_edf + result.edf)
            valid = denom > 0 and np.isfinite(deviance) and deviance > 0
            scores.append(n * deviance / denom**2 if valid else np.inf)
            results.append(result)
        scores = np.asarray(scores)
        finite = scores[np.isfinite(scores)]
        flat = len(finite) > 1 and float(finite.max() - finite.min()) < GCV_FLAT_TOL * (1.0 + abs(float(finite.min())))
        if len(finite) == 0 or flat:
            best = len(self.cfg.lambda_grid) // 2
        else:
            best = int(np.nanargmin(scores))
        term.lam = self.cfg.lambda_grid[best]
        return results[best]

    def backfit(self, role: str, z: np.ndarray, w: np.ndarray, select: bool) -> None:
        role_terms = self.terms[role]
        fits = [t.fitted for t in role_terms]
        for sweep in range(self.cfg.max_inner_sweeps):
            max_change = 0.0
            for j, term in enumerate(role_terms):
                other_fit = np.sum(fits[:j] + fits[j + 1 :], axis=0) if len(fits) > 1 else np.zeros_like(z)
                partial = z - other_fit
                if select and sweep == 0 and term.select:
                    result = self._select_lambda(role, term, partial, w, other_fit)
                else:
                    result = _solve_penalized(term.design, w, partial, term.penalty, term.lam, self.cfg.ridge)
                self.ridge_rescued |= result.rescued
                change = float(np.max(np.abs(result.coef - term.coef), initial=0.0))
                max_change = max(max_change, change / (1.0 + float(np.max(np.abs(result.coef), initial=0.0))))
                term.coef = result.coef
                term.edf = result.edf
                fits[j] = term.fitted
            if len(role_terms) == 1 or max_change < self.cfg.inner_tol:
                break

    # -- scoring step ------------------------------------------------------
    def update_role(self, role: str, select: bool = False) -> None:
        role_terms = self.terms[role]
        old_coefs = [t.coef.copy() for t in role_terms]
        old_edf = [t.edf for t in role_terms]
        old_eta = self.eta[role].copy()

        params = self.params_from(self.eta)
        u, w = self.family.working_quantities(role, self.y, params, self.eta[role], self.cfg.weight_floor)
        z = self.eta[role] + u / w
        self.backfit(role, z, w, select=select)

        # compare at the (possibly re-selected) smoothing parameters
        old_state = {**self.eta, role: old_eta}
        all_old = {r: [t.coef for t in ts] for r, ts in self.terms.items()}
        all_old[role] = old_coefs
        target = self.objective(old_state, all_old)

        new_coefs = [t.coef.copy() for t in role_terms]
        candidate = self.role_eta(role)
        value = self.objective({**self.eta, role: candidate})
        halvings = 0
        while value < target and halvings < self.cfg.max_step_halvings:
            halvings += 1
            new_coefs = [0.5 * (a + b) for a, b in zip(new_coefs, old_coefs)]
            for term, coef in zip(role_terms, new_coefs):
                term.coef = coef
            candidate = self.role_eta(role)
            value = self.objective({**self.eta, role: candidate})
        if value < target:
            logger.debug("%s: %s update rejected after %d halvings", self.spec.name, role, halvings)
            for term, coef, e in zip(role_terms, old_coefs, old_edf):
                term.coef = coef
                term.edf = e
            candidate = old_eta
        elif halvings:
            logger.debug("%s: %s update accepted after %d halvings", self.spec.name, role, halvings)
        self.eta[role] = candidate

    def refresh_edf(self) -> None:
        params = self.params_from(self.eta)
        for role in self.roles:
            _, w = self.family.working_quantities(role, self.y, params, self.eta[role], self.cfg.weight_floor)
            for term in self.terms[role]:
                gram = (term.design.T * w) @ term.design
                lhs = gram + term.lam * term.penalty
                try:
                    term.edf = float(np.trace(linalg.solve(lhs, gram, assume_a="sym")))
                except (linalg.LinAlgError, ValueError):
                    term.edf = float(np.linalg.matrix_rank(term.design))

    def smoothing_parameters(self) -> Tuple[float, ...]:
        return tuple(t.lam for ts in self.terms.values() for t in ts)

    # -- driver ------------------------------------------------------------
    def run(self, series_id: str) -> FittedModel:
        """Outer RS cycles.

        While GCV is active every cycle re-selects the smoothing parameters
        once per term; selection stops after a cycle that leaves all of them
        unchanged or after ``gcv_cycles`` cycles, and they stay fixed from
        then on. The trace restarts whenever they move, so it only holds
        objective values at the final smoothing parameters.
        """
        self.initialize()
        selecting = self.cfg.gcv and any(t.select for ts in self.terms.values() for t in ts)
        selection_cycles = 0
        trace = [self.objective(self.eta)]
        deviance = -2.0 * self.loglik(self.eta)
        converged = False
        iteration = 0
        for iteration in range(1, self.cfg.max_outer_iters + 1):
            before = self.smoothing_parameters()
            for role in self.roles:
                self.update_role(role, select=selecting)
            moved = self.smoothing_parameters() != before
            if selecting:
                selection_cycles += 1
                if not moved or selection_cycles >= self.cfg.gcv_cycles:
                    selecting = False
                    logger.debug("%s: smoothing parameters fixed after %d cycles", self.spec.name, selection_cycles)
            value = self.objective(self.eta)
            if moved:
                trace = [value]
            else:
                trace.append(value)
            new_deviance = -2.0 * self.loglik(self.eta)
            change = abs(deviance - new_deviance) / (abs(new_deviance) + 1e-10)
            deviance = new_deviance
            if change < self.cfg.rel_tol and not moved:
                converged = True
                break
        if not converged:
            logger.warning(
                "%s on %s did not converge in %d cycles", self.spec.name, series_id, self.cfg.max_outer_iters
            )
        self.refresh_edf()
        return self.result(series_id, converged, iteration, trace)

    def result(self, series_id: str, converged: bool, n_iter: int, trace: List[float]) -> FittedModel:
        loglik = self.loglik(self.eta)
        total_edf = float(sum(t.edf for ts in self.terms.values() for t in ts))
        fitted = {}
        for role in self.roles:
            eta_full = np.sum(
                [d @ t.coef for d, t in zip(self.full_designs[role], self.terms[role])], axis=0
            )
            fitted[role] = self.family.links[role].inverse(eta_full)
        coefficients, lambdas, term_edf = {}, {}, {}
        for role in self.roles:
            coefficients[role] = [t.realization.expand(t.coef) for t in self.terms[role]]
            lambdas[role] = [t.lam if t.realization.term_spec.penalized else None for t in self.terms[role]]
            term_edf[role] = [t.edf for t in self.terms[role]]
        if self.ridge_rescued:
            logger.warning("%s on %s needed a ridge rescue", self.spec.name, series_id)
        return FittedModel(
            series_id=series_id,
            spec=self.spec,
            coefficients=coefficients,
            lambdas=lambdas,
            term_edf=term_edf,
            edf=total_edf,
            loglik=loglik,
            penalized_nll=information_criterion(loglik, total_edf, len(self.y), self.cfg.criterion),
            criterion=self.cfg.criterion,
            converged=converged,
            n_obs=int(len(self.y)),
            n_iter=n_iter,
            ar_order=self.ar_order,
            events=(tuple(self.events[0]), tuple(self.events[1])),
            ridge_rescued=self.ridge_rescued,
            trace=tuple(trace),
            fitted=fitted,
        )


def _check_support(family: DistributionFamily, y: np.ndarray) -> None:
    try:
        family.check_support(y)
    except ValueError as exc:
        raise SupportViolation(str(exc)) from None


def fit(
    y,
    X: RegressorMatrix,
    spec: ModelFamilySpec,
    cfg: Optional[FitConfig] = None,
    series_id: str = "series",
    events: Optional[Tuple[Sequence[int], Sequence[int]]] = None,
) -> FittedModel:
    """Fit one model family to one series.

    Event terms use ``events`` when given, else candidates detected on ``y``;
    an event term with nothing to represent raises ``EmptyEventTerm``. Models
    with an AR term are fitted for every order 0..ar_order and the lowest AIC
    wins.
    """
    cfg = cfg or FitConfig()
    y = np.asarray(y, dtype=float)
    if len(y) != len(X):
        raise InsufficientData(f"series has {len(y)} points but the grid has {len(X)}")
    _check_support(spec.family(), y)

    if events is None and spec.event_kinds():
        events = detect_candidate_events(y, period=24 if spec.is_seasonal() else None)
    events = events or ((), ())

    max_order = spec.ar_order()
    if max_order == 0:
        return _Fitter(y, X, spec, cfg, events, 0).run(series_id)

    best: Optional[FittedModel] = None
    best_aic = np.inf
    for order in range(max_order + 1):
        model = _Fitter(y, X, spec, cfg, events, order).run(series_id)
        aic = information_criterion(model.loglik, model.edf, model.n_obs, "aic")
        logger.debug("%s on %s: AR(%d) AIC %.4f", spec.name, series_id, order, aic)
        if aic < best_aic:
            best, best_aic = model, aic
    assert best is not None
    return best


def select_lambdas(
    y,
    X: RegressorMatrix,
    spec: ModelFamilySpec,
    cfg: Optional[FitConfig] = None,
) -> Dict[str, List[Optional[float]]]:
    """Smoothing parameters chosen by GCV for every penalized term."""
    cfg = cfg or FitConfig()
    if not cfg.gcv:
        cfg = cfg.model_copy(update={"gcv": True})
    return fit(y, X, spec, cfg).lambdas


def term_edf(model: FittedModel) -> Dict[str, List[float]]:
    return {role: list(values) for role, values in model.term_edf.items()}
