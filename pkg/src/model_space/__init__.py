from src.model_space.binning import BinnedFamilySummary, bin_coefficients
from src.model_space.divergence import kl_divergence_oracle, mean_kl_divergence
from src.model_space.persistence import load_model_space, read_context, save_model_space
from src.model_space.space import (
    ModelSpace,
    ScoreRecord,
    classify_and_rank,
    construct_model_space,
    feedback_update,
    precision_control,
    score_all,
    score_series,
)
from src.model_space.weights import akaike_weights, delta, series_score

__all__ = [
    "BinnedFamilySummary",
    "ModelSpace",
    "ScoreRecord",
    "akaike_weights",
    "bin_coefficients",
    "classify_and_rank",
    "construct_model_space",
    "delta",
    "feedback_update",
    "kl_divergence_oracle",
    "load_model_space",
    "mean_kl_divergence",
    "precision_control",
    "read_context",
    "save_model_space",
    "score_all",
    "score_series",
    "series_score",
]
