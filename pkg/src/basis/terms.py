"""Basis term specifications and their realization on a regressor grid."""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, model_validator

from src.basis.design import fourier_design, lagged_response_design, pulse_and_step_design
from src.basis.splines import (
    bspline_design,
    cyclic_cubic_design,
    equally_spaced_knots,
    pspline_penalty,
)
from src.errors import DomainError, EmptyEventTerm

logger = logging.getLogger(__name__)


class TermKind(str, Enum):
    INTERCEPT = "intercept"
    PSPLINE_LINEAR = "pspline_linear"
    PSPLINE_CUBIC = "pspline_cubic"
    CYCLIC_CUBIC = "cyclic_cubic"
    FOURIER = "fourier"
    AR = "ar"
    PULSE = "pulse"
    STEP = "step"


PSPLINE_KINDS = {TermKind.PSPLINE_LINEAR, TermKind.PSPLINE_CUBIC}
EVENT_KINDS = {TermKind.PULSE, TermKind.STEP}
CYCLE_LENGTHS = {"hour": 24, "dow": 7}


class BasisTermSpec(BaseModel):
    """One additive term b_jm of a parameter's linear predictor."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: TermKind
    input: Literal["time", "hour", "dow"] = "time"
    num_knots: Optional[int] = None
    num_harmonics: Optional[int] = None
    period: Optional[float] = None
    ar_order: Optional[int] = None
    penalty_order: Optional[int] = None
    lam: Union[float, Literal["gcv"], None] = None

    @model_validator(mode="after")
    def _check_sizes(self) -> "BasisTermSpec":
        if self.kind in PSPLINE_KINDS:
            num_knots = self.num_knots if self.num_knots is not None else 20
            if num_knots < self.order + 2:
                raise ValueError(
                    f"num_knots ({num_knots}) must be >= penalty_order + 2 ({self.order + 2})"
                )
        if self.kind == TermKind.AR and (self.ar_order or 0) < 1:
            raise ValueError("ar_order must be >= 1")
        if self.kind == TermKind.FOURIER:
            if (self.num_harmonics or 0) < 1:
                raise ValueError("num_harmonics must be >= 1")
            if self.period is None:
                raise ValueError("fourier terms need a period")
        if self.kind == TermKind.CYCLIC_CUBIC and self.input not in CYCLE_LENGTHS:
            raise ValueError("cyclic_cubic terms take input 'hour' or 'dow'")
        if isinstance(self.lam, float) and self.lam < 0:
            raise ValueError("lam must be >= 0")
        return self

    @property
    def degree(self) -> int:
        return 1 if self.kind == TermKind.PSPLINE_LINEAR else 3

    @property
    def order(self) -> int:
        if self.penalty_order is not None:
            return self.penalty_order
        return 1 if self.kind == TermKind.PSPLINE_LINEAR else 2

    @property
    def penalized(self) -> bool:
        return self.kind in PSPLINE_KINDS or self.kind == TermKind.CYCLIC_CUBIC

    @property
    def uses_gcv(self) -> bool:
        return self.penalized and (self.lam is None or self.lam == "gcv")

    @property
    def label(self) -> str:
        if self.kind in (TermKind.INTERCEPT, TermKind.PULSE, TermKind.STEP, TermKind.AR):
            return self.kind.value
        return f"{self.kind.value}({self.input})"


@dataclass(frozen=True)
class RegressorMatrix:
    """Common regressors X_T over the shared time grid."""

    time_index: np.ndarray
    hour_of_day: np.ndarray
    day_of_week: np.ndarray  # Monday = 1
    timestamps: Optional[pd.DatetimeIndex] = None
    pulse_indicators: Optional[Tuple[int, ...]] = None

    def __post_init__(self) -> None:
        n = len(self.time_index)
        if len(self.hour_of_day) != n or len(self.day_of_week) != n:
            raise DomainError("regressor columns differ in length")

    def __len__(self) -> int:
        return len(self.time_index)

    def column(self, name: str) -> np.ndarray:
        if name == "time":
            return self.time_index.astype(float)
        if name == "hour":
            return self.hour_of_day.astype(float)
        if name == "dow":
            return (self.day_of_week - 1).astype(float)
        raise DomainError(f"unknown regressor {name!r}")


def build_regressors(timestamps: Sequence) -> RegressorMatrix:
    index = pd.DatetimeIndex(pd.to_datetime(timestamps))
    return RegressorMatrix(
        time_index=np.arange(len(index)),
        hour_of_day=index.hour.to_numpy(),
        day_of_week=index.dayofweek.to_numpy() + 1,
        timestamps=index,
    )


def hourly_regressors(n: int, start: str = "2024-01-01") -> RegressorMatrix:
    """Regressors for an hourly grid of ``n`` points (the default start is a Monday)."""
    return build_regressors(pd.date_range(start, periods=n, freq="h"))


@dataclass(frozen=True)
class BasisRealization:
    """Design and penalty of one term; ``constraint`` maps reduced to full coefficients."""

    design_matrix: np.ndarray
    penalty_matrix: np.ndarray
    term_spec: BasisTermSpec
    constraint: Optional[np.ndarray] = None
    column_names: List[str] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.design_matrix.shape[1]

    @property
    def fit_design(self) -> np.ndarray:
        if self.constraint is None:
            return self.design_matrix
        return self.design_matrix @ self.constraint

    @property
    def fit_penalty(self) -> np.ndarray:
        if self.constraint is None:
            return self.penalty_matrix
        return self.constraint.T @ self.penalty_matrix @ self.constraint

    def expand(self, reduced: np.ndarray) -> np.ndarray:
        return reduced if self.constraint is None else self.constraint @ reduced


def sum_to_zero_constraint(design: np.ndarray) -> np.ndarray:
    """Null-space basis Z of the column-sum constraint, so that 1^T B Z a = 0."""
    sums = design.sum(axis=0).reshape(-1, 1)
    q, _ = np.linalg.qr(sums, mode="complete")
    return q[:, 1:]


def realize_term(
    term: BasisTermSpec,
    X: RegressorMatrix,
    eta_response: Optional[np.ndarray] = None,
    events: Optional[Tuple[Sequence[int], Sequence[int]]] = None,
    centered: bool = True,
    ar_order: Optional[int] = None,
) -> BasisRealization:
    """Build the design/penalty pair for ``term`` over the grid of ``X``.

    Smooth terms absorb a sum-to-zero constraint when ``centered`` (the
    parameter also carries an intercept). AR terms need the link-scale
    response ``eta_response``; pulse and step terms need ``events`` and raise
    ``EmptyEventTerm`` when there are none.
    """
    n = len(X)
    constraint = None
    kind = term.kind
    if kind == TermKind.INTERCEPT:
        design, penalty, names = np.ones((n, 1)), np.zeros((1, 1)), ["intercept"]
    elif kind in PSPLINE_KINDS:
        x = X.column(term.input)
        knots = equally_spaced_knots(float(x.min()), float(x.max()), term.num_knots or 20)
        design = bspline_design(x, knots, term.degree)
        penalty = pspline_penalty(design.shape[1], term.order)
        names = [f"{term.label}[{i}]" for i in range(design.shape[1])]
    elif kind == TermKind.CYCLIC_CUBIC:
        design, penalty = cyclic_cubic_design(
            X.column(term.input), CYCLE_LENGTHS[term.input], term.num_knots
        )
        names = [f"{term.label}[{i}]" for i in range(design.shape[1])]
    elif kind == TermKind.FOURIER:
        design = fourier_design(X.column(term.input), float(term.period), int(term.num_harmonics))
        penalty = np.zeros((design.shape[1], design.shape[1]))
        names = [
            f"{trig}{k}(p={term.period:g})"
            for k in range(1, int(term.num_harmonics) + 1)
            for trig in ("sin", "cos")
        ]
    elif kind == TermKind.AR:
        if eta_response is None:
            raise DomainError("AR terms need the link-scale response")
        order = ar_order if ar_order is not None else int(term.ar_order)
        design = lagged_response_design(eta_response, order)
        penalty = np.zeros((order, order))
        names = [f"ar[{lag}]" for lag in range(1, order + 1)]
    elif kind in EVENT_KINDS:
        pulses, steps = events if events is not None else ((), ())
        chosen = pulses if kind == TermKind.PULSE else steps
        if len(chosen) == 0:
            raise EmptyEventTerm(f"no {kind.value} events detected")
        if kind == TermKind.PULSE:
            design = pulse_and_step_design(n, chosen, ())
        else:
            design = pulse_and_step_design(n, (), chosen)
        penalty = np.zeros((design.shape[1], design.shape[1]))
        names = [f"{kind.value}@{t}" for t in sorted(chosen)]
    else:  # pragma: no cover
        raise DomainError(f"unsupported term kind {kind}")

    if centered and term.penalized:
        constraint = sum_to_zero_constraint(design)
    if np.any(np.all(design == 0, axis=0)) and kind != TermKind.AR:
        raise DomainError(f"{term.label} has an all-zero column on this grid")
    return BasisRealization(design, penalty, term, constraint, names)
