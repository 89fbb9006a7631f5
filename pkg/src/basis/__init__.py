from src.basis.design import fourier_design, lagged_response_design, pulse_and_step_design
from src.basis.events import detect_candidate_events
from src.basis.splines import bspline_design, cyclic_cubic_design, pspline_penalty
from src.basis.terms import (
    BasisRealization,
    BasisTermSpec,
    RegressorMatrix,
    TermKind,
    build_regressors,
    hourly_regressors,
    realize_term,
)

__all__ = [
    "BasisRealization",
    "BasisTermSpec",
    "RegressorMatrix",
    "TermKind",
    "build_regressors",
    "bspline_design",
    "cyclic_cubic_design",
    "detect_candidate_events",
    "fourier_design",
    "hourly_regressors",
    "lagged_response_design",
    "pspline_penalty",
    "pulse_and_step_design",
    "realize_term",
]
