"""Null/alternative model space, anomaly scores and feedback."""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, Iterable, List, Literal, Mapping, Optional, Sequence, Set, Tuple

import numpy as np

from src.config import settings
from src.errors import DegenerateSpace, DomainError, UnknownSeries
from src.gamlss.model import FittedModel
from src.model_space.weights import akaike_weights, delta, series_score

logger = logging.getLogger(__name__)

ModelKey = Tuple[str, str]


@dataclass(frozen=True)
class ScoreRecord:
    series_id: str
    family_ids: Tuple[str, ...]
    deltas: Tuple[float, ...]
    weights: Tuple[float, ...]
    score: float
    alt_score: float
    rank: int = 0
    is_anomalous: bool = False

    def __post_init__(self) -> None:
        if self.weights and abs(sum(self.weights) - 1.0) > 1e-10:
            raise DomainError(f"weights of {self.series_id} do not sum to one")
        if self.deltas and min(self.deltas) != 0.0:
            raise DomainError(f"deltas of {self.series_id} have a non-zero minimum")

    @property
    def best_family(self) -> str:
        return self.family_ids[int(np.argmin(self.deltas))]


@dataclass(frozen=True)
class ModelSpace:
    models: Dict[ModelKey, FittedModel]
    null_models: FrozenSet[ModelKey]
    alt_models: FrozenSet[ModelKey]
    null_families: FrozenSet[str]
    alpha: float
    n_min: int
    anomalous_series: FrozenSet[str]
    normal_series: FrozenSet[str]
    forced_null: FrozenSet[ModelKey] = frozenset()
    forced_alt: FrozenSet[ModelKey] = frozenset()
    whitelisted_families: FrozenSet[str] = frozenset()
    confirmed_normal: FrozenSet[str] = frozenset()
    confirmed_anomalous: FrozenSet[str] = frozenset()
    weights: Dict[ModelKey, float] = field(default_factory=dict, compare=False, repr=False)

    @property
    def series_ids(self) -> List[str]:
        return sorted({key[0] for key in self.models})

    def models_for(self, series_id: str) -> List[FittedModel]:
        found = [m for key, m in sorted(self.models.items()) if key[0] == series_id]
        if not found:
            raise UnknownSeries(series_id)
        return found

    def is_null(self, key: ModelKey) -> bool:
        if key in self.forced_alt:
            return False
        return key[1] in self.null_families or key in self.forced_null

    def score(self, series_id: str) -> ScoreRecord:
        return _score_models(self.models_for(series_id), self.is_null)


def _score_models(models: Sequence[FittedModel], is_null) -> ScoreRecord:
    deltas = delta(models)
    weights = akaike_weights(deltas)
    flags = [is_null(m.key) for m in models]
    pi, alt = series_score(weights, flags)
    return ScoreRecord(
        series_id=models[0].series_id,
        family_ids=tuple(m.family_id for m in models),
        deltas=tuple(float(d) for d in deltas),
        weights=tuple(float(w) for w in weights),
        score=pi,
        alt_score=alt,
    )


def _group(fits: Iterable[FittedModel]) -> Dict[str, List[FittedModel]]:
    grouped: Dict[str, List[FittedModel]] = {}
    for model in fits:
        grouped.setdefault(model.series_id, []).append(model)
    for models in grouped.values():
        models.sort(key=lambda m: m.family_id)
    return grouped


def construct_model_space(
    fits,
    alpha: Optional[float] = None,
    n_min: Optional[int] = None,
    forced_null: Iterable[ModelKey] = (),
    forced_alt: Iterable[ModelKey] = (),
    whitelisted_families: Iterable[str] = (),
    confirmed_normal: Iterable[str] = (),
    confirmed_anomalous: Iterable[str] = (),
) -> ModelSpace:
    """Build the null/alternative partition from per-series fits.

    Stage one keeps, per series, the models whose Akaike weight among that
    series' fits reaches ``alpha``. Stage two drops families supported by
    fewer than ``n_min`` distinct non-anomalous series. Stage three moves
    every series whose score falls below ``alpha`` to the anomalous set and
    withdraws its models. Stages two and three repeat until nothing changes.

    ``fits`` is either a mapping series_id -> models or a flat iterable.
    """
    grouped = (
        {sid: sorted(ms, key=lambda m: m.family_id) for sid, ms in fits.items()}
        if isinstance(fits, Mapping)
        else _group(fits)
    )
    alpha = settings.DEFAULT_ALPHA if alpha is None else alpha
    n_min = settings.n_min_for(len(grouped)) if n_min is None else n_min
    if not 0 < alpha < 1:
        raise DomainError("alpha must lie in (0, 1)")
    if n_min < 1:
        raise DomainError("n_min must be >= 1")
    empty = [sid for sid, models in grouped.items() if not models]
    if empty:
        raise DomainError(f"series without fitted models: {empty}")

    forced_null_set = frozenset(forced_null)
    forced_alt_set = frozenset(forced_alt)
    whitelist = frozenset(whitelisted_families)
    normal_labels = frozenset(confirmed_normal)
    anomaly_labels = frozenset(confirmed_anomalous)

    models: Dict[ModelKey, FittedModel] = {}
    weights: Dict[ModelKey, float] = {}
    for series_id, series_models in sorted(grouped.items()):
        for model, weight in zip(series_models, akaike_weights(delta(series_models))):
            models[model.key] = model
            weights[model.key] = float(weight)
    unknown = (forced_null_set | forced_alt_set) - set(models)
    if unknown:
        raise UnknownSeries(f"feedback refers to unknown models {sorted(unknown)}")

    plausible = {key for key, weight in weights.items() if weight >= alpha}
    anomalous: Set[str] = set(anomaly_labels)

    while True:
        candidates = {
            key for key in plausible | forced_null_set
            if key[0] not in anomalous and key not in forced_alt_set
        }
        support: Dict[str, Set[str]] = {}
        for series_id, family_id in candidates:
            support.setdefault(family_id, set()).add(series_id)
        null_families = frozenset(
            {fam for fam, sids in support.items() if len(sids) >= n_min} | whitelist
        )
        null_models = {
            key for key in candidates
            if key[1] in null_families or key in forced_null_set
        }
        if not null_models:
            raise DegenerateSpace(
                f"no null models survive alpha={alpha} and n_min={n_min}"
            )

        def is_null(key: ModelKey) -> bool:
            if key in forced_alt_set:
                return False
            return key[1] in null_families or key in forced_null_set

        newly = set()
        for series_id, series_models in grouped.items():
            if series_id in anomalous or series_id in normal_labels:
                continue
            pi, _ = series_score([weights[m.key] for m in series_models], [is_null(m.key) for m in series_models])
            if pi < alpha:
                newly.add(series_id)
        if not newly:
            break
        logger.debug("stage three moved %d series to the anomalous set", len(newly))
        anomalous |= newly

    all_keys = frozenset(models)
    space = ModelSpace(
        models=models,
        null_models=frozenset(null_models),
        alt_models=all_keys - frozenset(null_models),
        null_families=null_families,
        alpha=alpha,
        n_min=n_min,
        anomalous_series=frozenset(anomalous),
        normal_series=frozenset(grouped) - frozenset(anomalous),
        forced_null=forced_null_set,
        forced_alt=forced_alt_set,
        whitelisted_families=whitelist,
        confirmed_normal=normal_labels,
        confirmed_anomalous=anomaly_labels,
        weights=weights,
    )
    logger.info(
        "model space: %d models, %d null, families %s, %d anomalous series",
        len(models),
        len(null_models),
        sorted(null_families),
        len(anomalous),
    )
    return space


def score_all(space: ModelSpace) -> List[ScoreRecord]:
    return [space.score(series_id) for series_id in space.series_ids]


def score_series(models: Sequence[FittedModel], space: ModelSpace) -> ScoreRecord:
    """Score a series that is not part of ``space`` against its null families."""
    if not models:
        raise DomainError("score_series needs at least one fitted model")
    return _score_models(list(models), lambda key: key[1] in space.null_families)


def classify_and_rank(
    scores: Sequence[ScoreRecord],
    alpha: Optional[float] = None,
    top_k: Optional[int] = None,
) -> List[ScoreRecord]:
    """Rank by ascending score (ties by series id) and flag scores below alpha."""
    alpha = settings.DEFAULT_ALPHA if alpha is None else alpha
    ordered = sorted(scores, key=lambda r: (r.score, r.series_id))
    ranked = [
        replace(record, rank=i + 1, is_anomalous=record.score < alpha)
        for i, record in enumerate(ordered)
    ]
    return ranked if top_k is None else ranked[:top_k]


def precision_control(scores: Sequence[ScoreRecord], rho: Optional[float] = None) -> Set[str]:
    rho = settings.DEFAULT_RHO if rho is None else rho
    if not 0 < rho < 1:
        raise DomainError("rho must lie in (0, 1)")
    return {r.series_id for r in scores if r.alt_score >= rho}


def feedback_update(
    space: ModelSpace,
    series_id: str,
    label: Literal["FP", "FN"],
) -> ModelSpace:
    """Insert a labelled series into the null (FP) or alternative (FN) space."""
    models = space.models_for(series_id)
    best = min(models, key=lambda m: (m.penalized_nll, m.family_id))
    forced_null = set(space.forced_null)
    forced_alt = set(space.forced_alt)
    whitelist = set(space.whitelisted_families)
    normal = set(space.confirmed_normal)
    anomalous = set(space.confirmed_anomalous)
    label = label.upper()  # type: ignore[assignment]
    if label == "FP":
        forced_null.add(best.key)
        forced_alt.discard(best.key)
        whitelist.add(best.family_id)
        normal.add(series_id)
        anomalous.discard(series_id)
    elif label == "FN":
        forced_alt.add(best.key)
        forced_null.discard(best.key)
        anomalous.add(series_id)
        normal.discard(series_id)
    else:
        raise DomainError(f"label must be FP or FN, got {label!r}")
    logger.info("feedback %s on %s (best family %s)", label, series_id, best.family_id)
    return construct_model_space(
        list(space.models.values()),
        alpha=space.alpha,
        n_min=space.n_min,
        forced_null=forced_null,
        forced_alt=forced_alt,
        whitelisted_families=whitelist,
        confirmed_normal=normal,
        confirmed_anomalous=anomalous,
    )
