from src.gamlss.fit import fit, select_lambdas, term_edf
from src.gamlss.model import FittedModel, edf, information_criterion, penalized_nll
from src.gamlss.specs import FitConfig, ModelFamilySpec, load_family_specs

__all__ = [
    "FitConfig",
    "FittedModel",
    "ModelFamilySpec",
    "edf",
    "fit",
    "information_criterion",
    "load_family_specs",
    "penalized_nll",
    "select_lambdas",
    "term_edf",
]
