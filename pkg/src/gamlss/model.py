from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from src.errors import DomainError
from src.gamlss.specs import ModelFamilySpec


def information_criterion(loglik: float, edf: float, n_obs: int, criterion: str) -> float:
    """-2 loglik plus 2 edf (AIC) or log(n_obs) edf (BIC)."""
    criterion = criterion.lower()
    if criterion == "aic":
        return -2.0 * loglik + 2.0 * edf
    if criterion == "bic":
        return -2.0 * loglik + float(np.log(n_obs)) * edf
    raise ValueError(f"unknown criterion {criterion!r}")


@dataclass(frozen=True)
class FittedModel:
    """One family fitted to one series.

    ``trace`` holds the penalized log-likelihood after every outer cycle run
    at the final smoothing parameters. ``fitted`` holds the natural-scale
    parameters over the full grid; records keep them only when asked to, so
    a model loaded from a record without them has an empty ``fitted``.
    """

    series_id: str
    spec: ModelFamilySpec
    coefficients: Dict[str, List[np.ndarray]]
    lambdas: Dict[str, List[Optional[float]]]
    term_edf: Dict[str, List[float]]
    edf: float
    loglik: float
    penalized_nll: float
    criterion: str
    converged: bool
    n_obs: int
    n_iter: int = 0
    ar_order: int = 0
    events: Tuple[Tuple[int, ...], Tuple[int, ...]] = ((), ())
    ridge_rescued: bool = False
    trace: Tuple[float, ...] = ()
    fitted: Dict[str, np.ndarray] = field(default_factory=dict, compare=False, repr=False)

    @property
    def family_id(self) -> str:
        return self.spec.name

    @property
    def key(self) -> Tuple[str, str]:
        return self.series_id, self.spec.name

    @property
    def n_coefficients(self) -> int:
        return int(sum(len(c) for role in self.coefficients.values() for c in role))

    def flat_coefficients(self) -> Dict[str, float]:
        """Coefficients keyed ``role:term_index:position`` for binning and persistence."""
        flat = {}
        for role, blocks in self.coefficients.items():
            for j, block in enumerate(blocks):
                for i, value in enumerate(np.atleast_1d(block)):
                    flat[f"{role}:{j}:{i}"] = float(value)
        return flat

    def fitted_parameters(self) -> Dict[str, np.ndarray]:
        if not self.fitted:
            raise DomainError(f"{self.family_id} on {self.series_id} carries no fitted values; refit the series")
        return {role: np.asarray(v) for role, v in self.fitted.items()}

    def to_record(self, include_fitted: bool = False) -> Dict[str, Any]:
        record = {
            "series_id": self.series_id,
            "family_id": self.spec.name,
            "spec": self.spec.model_dump(mode="json"),
            "coefficients": {
                role: [np.asarray(block, dtype=float).tolist() for block in blocks]
                for role, blocks in self.coefficients.items()
            },
            "lambdas": {role: list(values) for role, values in self.lambdas.items()},
            "term_edf": {role: [float(v) for v in values] for role, values in self.term_edf.items()},
            "edf": float(self.edf),
            "loglik": float(self.loglik),
            "penalized_nll": float(self.penalized_nll),
            "criterion": self.criterion,
            "converged": bool(self.converged),
            "n_obs": int(self.n_obs),
            "n_iter": int(self.n_iter),
            "ar_order": int(self.ar_order),
            "events": {"pulses": list(self.events[0]), "steps": list(self.events[1])},
            "ridge_rescued": bool(self.ridge_rescued),
        }
        if include_fitted:
            record["fitted"] = {role: np.asarray(v, dtype=float).tolist() for role, v in self.fitted.items()}
        return record

    @classmethod
    def from_record(cls, record: Dict[str, Any]) -> "FittedModel":
        events = record.get("events") or {}
        return cls(
            series_id=str(record["series_id"]),
            spec=ModelFamilySpec.model_validate(record["spec"]),
            coefficients={
                role: [np.asarray(block, dtype=float) for block in blocks]
                for role, blocks in record["coefficients"].items()
            },
            lambdas={role: list(v) for role, v in record["lambdas"].items()},
            term_edf={role: list(v) for role, v in record["term_edf"].items()},
            edf=float(record["edf"]),
            loglik=float(record["loglik"]),
            penalized_nll=float(record["penalized_nll"]),
            criterion=str(record["criterion"]),
            converged=bool(record["converged"]),
            n_obs=int(record["n_obs"]),
            n_iter=int(record.get("n_iter", 0)),
            ar_order=int(record.get("ar_order", 0)),
            events=(tuple(events.get("pulses", ())), tuple(events.get("steps", ()))),
            ridge_rescued=bool(record.get("ridge_rescued", False)),
            fitted={role: np.asarray(v, dtype=float) for role, v in (record.get("fitted") or {}).items()},
        )


def penalized_nll(model: FittedModel, criterion: Optional[str] = None) -> float:
    return information_criterion(
        model.loglik, model.edf, model.n_obs, criterion or model.criterion
    )


def edf(model: FittedModel) -> float:
    return float(model.edf)
