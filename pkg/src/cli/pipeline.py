"""Batch pipeline: fit every (series, family) pair, build the space, score, report."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import yaml
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field, field_validator
from rich.progress import track

from src.basis.terms import RegressorMatrix, hourly_regressors
from src.cli import io
from src.config import settings
from src.distributions.residuals import ks_statistic, quantile_residuals, worm_pairs
from src.errors import (
    DegenerateSpace,
    DomainError,
    EmptyEventTerm,
    InsufficientData,
    LabelMismatch,
    ShapeAnomalyError,
    SingularSystem,
)
from src.gamlss.fit import fit
from src.gamlss.model import FittedModel
from src.gamlss.specs import FitConfig, ModelFamilySpec, load_family_specs
from src.metrics.scores import MetricsReport, evaluate, summarize
from src.model_space.binning import BinnedFamilySummary, bin_coefficients
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
from src.series import TimeSeriesSample
from src.simulation.experiments import ANOMALY, LabeledDataset, build_experiment
from src.simulation.priors import SimConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

# per-task failures that only remove one (series, family) pair
SKIPPABLE = (EmptyEventTerm, InsufficientData, SingularSystem, DomainError)

RANKING_COLUMNS = ["series_id", "score", "alt_score", "rank", "is_anomalous"]


class PipelineConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    input: Optional[Path] = None
    output: Path = Path("output")
    families: List[str] = Field(default_factory=lambda: list(settings.DEFAULT_FAMILIES))
    custom_families: Dict[str, Dict] = Field(default_factory=dict)
    alpha: float = Field(default_factory=lambda: settings.DEFAULT_ALPHA, gt=0, lt=1)
    n_min: Optional[int] = Field(default=None, ge=1)
    rho: float = Field(default_factory=lambda: settings.DEFAULT_RHO, gt=0, lt=1)
    top_k: int = Field(default_factory=lambda: settings.DEFAULT_TOP_K, ge=1)
    criterion: str = Field(default_factory=lambda: settings.DEFAULT_CRITERION)
    rescale_means: bool = True
    residual_resolution: Optional[float] = Field(default=None, gt=0)
    seed: int = Field(default_factory=lambda: settings.DEFAULT_SEED)
    workers: int = Field(default_factory=lambda: settings.DEFAULT_WORKERS, ge=1)
    fit: Dict = Field(default_factory=dict)

    @field_validator("families")
    @classmethod
    def _at_least_one(cls, families: List[str]) -> List[str]:
        if not families:
            raise ValueError("at least one model family is required")
        return families

    @field_validator("criterion")
    @classmethod
    def _known_criterion(cls, criterion: str) -> str:
        criterion = criterion.lower()
        if criterion not in ("aic", "bic"):
            raise ValueError("criterion must be aic or bic")
        return criterion

    @classmethod
    def load(cls, path: Optional[Path] = None, **overrides) -> "PipelineConfig":
        """Config file values, overridden by every keyword that is not None."""
        data: Dict = {}
        if path is not None:
            with open(path, encoding="utf-8") as handle:
                data = yaml.safe_load(handle) or {}
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)

    def family_specs(self) -> List[ModelFamilySpec]:
        return load_family_specs(self.families, self.custom_families)

    def fit_config(self) -> FitConfig:
        return FitConfig(criterion=self.criterion, **self.fit)


@dataclass
class DetectionResult:
    space: ModelSpace
    ranking: List[ScoreRecord]
    flagged: List[str]
    diagnostics: pd.DataFrame
    worm: pd.DataFrame
    binned: List[BinnedFamilySummary]
    context: Dict = field(default_factory=dict)

    def ranking_frame(self) -> pd.DataFrame:
        rows = [{column: getattr(r, column) for column in RANKING_COLUMNS} for r in self.ranking]
        return pd.DataFrame(rows, columns=RANKING_COLUMNS)

    @property
    def ranked_ids(self) -> List[str]:
        return [r.series_id for r in self.ranking]


def _fit_task(
    series: TimeSeriesSample,
    X: RegressorMatrix,
    spec: ModelFamilySpec,
    cfg: FitConfig,
) -> Tuple[str, str, Optional[FittedModel], Optional[str]]:
    try:
        model = fit(series.values, X, spec, cfg, series_id=series.series_id)
    except SKIPPABLE as exc:
        return series.series_id, spec.name, None, f"{type(exc).__name__}: {exc}"
    return series.series_id, spec.name, model, None


class DetectionPipeline:
    """Fits the configured families to a collection and scores every series."""

    def __init__(self, config: PipelineConfig) -> None:
        self.config = config
        self.specs = config.family_specs()
        self.fit_config = config.fit_config()

    def target_mean(self, series: Sequence[TimeSeriesSample]) -> Optional[float]:
        if not self.config.rescale_means:
            return None
        return float(np.mean([np.nanmean(s.values) for s in series]))

    def fit_collection(
        self,
        series: Sequence[TimeSeriesSample],
        X: RegressorMatrix,
        specs: Optional[Sequence[ModelFamilySpec]] = None,
        show_progress: bool = True,
    ) -> Dict[str, List[FittedModel]]:
        specs = list(specs or self.specs)
        tasks = [(s, spec) for s in series for spec in specs]
        parallel = Parallel(n_jobs=self.config.workers, return_as="generator")
        results = parallel(delayed(_fit_task)(s, X, spec, self.fit_config) for s, spec in tasks)
        if show_progress:
            results = track(results, total=len(tasks), description="Fitting models")
        fitted: Dict[str, List[FittedModel]] = {}
        for series_id, family_id, model, reason in sorted(results, key=lambda item: item[:2]):
            if model is None:
                logger.debug("skipped %s on %s (%s)", family_id, series_id, reason)
                continue
            fitted.setdefault(series_id, []).append(model)
        unfitted = sorted({s.series_id for s in series} - set(fitted))
        if unfitted:
            logger.warning("no family could be fitted to %d series: %s", len(unfitted), unfitted[:10])
        return fitted

    def diagnostics(
        self,
        series: Sequence[TimeSeriesSample],
        space: ModelSpace,
        scores: Dict[str, ScoreRecord],
    ) -> Tuple[pd.DataFrame, pd.DataFrame]:
        rows, worm_frames = [], []
        for sample in series:
            record = scores.get(sample.series_id)
            if record is None:
                continue
            best = space.models[(sample.series_id, record.best_family)]
            grain = self.config.residual_resolution
            try:
                residuals = quantile_residuals(
                    best.spec.family(),
                    sample.values,
                    best.fitted_parameters(),
                    self.config.seed,
                    None if grain is None else grain * sample.scale_factor,
                )
            except ShapeAnomalyError as exc:
                logger.warning("residuals of %s failed: %s", sample.series_id, exc)
                residuals = np.array([])
            theoretical, deviation = worm_pairs(residuals)
            worm_frames.append(
                pd.DataFrame(
                    {"series_id": sample.series_id, "theoretical": theoretical, "deviation": deviation}
                )
            )
            rows.append(
                {
                    "series_id": sample.series_id,
                    "best_family": best.family_id,
                    "edf": best.edf,
                    "loglik": best.loglik,
                    "penalized_nll": best.penalized_nll,
                    "converged": best.converged,
                    "n_obs": best.n_obs,
                    "ks_statistic": ks_statistic(residuals),
                    "scale_factor": sample.scale_factor,
                    "n_families_fitted": len(record.family_ids),
                }
            )
        worm = (
            pd.concat(worm_frames, ignore_index=True)
            if worm_frames
            else pd.DataFrame(columns=["series_id", "theoretical", "deviation"])
        )
        return pd.DataFrame(rows), worm

    def detect(
        self,
        series: Sequence[TimeSeriesSample],
        X: RegressorMatrix,
        show_progress: bool = True,
    ) -> DetectionResult:
        target = self.target_mean(series)
        prepared = [s.rescaled(target) for s in series]
        fitted = self.fit_collection(prepared, X, show_progress=show_progress)
        if not fitted:
            raise DegenerateSpace("no series could be fitted under any family")
        space = construct_model_space(fitted, alpha=self.config.alpha, n_min=self.config.n_min)
        scores = score_all(space)
        ranking = classify_and_rank(scores, self.config.alpha)
        flagged = sorted(precision_control(scores, self.config.rho))
        diagnostics, worm = self.diagnostics(prepared, space, {r.series_id: r for r in ranking})
        binned = [
            bin_coefficients([m for m in space.models.values() if m.family_id == family])
            for family in sorted({m.family_id for m in space.models.values()})
        ]
        context = {"target_mean": target, "criterion": self.config.criterion, "seed": self.config.seed}
        logger.info(
            "%d of %d series below alpha=%.3f, %d flagged at rho=%.3f",
            sum(r.is_anomalous for r in ranking),
            len(ranking),
            self.config.alpha,
            len(flagged),
            self.config.rho,
        )
        return DetectionResult(space, ranking, flagged, diagnostics, worm, binned, context)

    def write(self, result: DetectionResult, out_dir) -> None:
        out = Path(out_dir)
        io.write_csv(result.ranking_frame(), out / "ranking.csv")
        io.write_csv(pd.DataFrame({"series_id": result.flagged}), out / "flagged.csv")
        io.write_csv(result.diagnostics, out / "diagnostics.csv")
        io.write_csv(result.worm, out / "worm.csv")
        save_model_space(result.space, out / "model_space", result.binned, result.context)
        logger.info("wrote detection results to %s", out)


def guarded(action: Callable[[], object], output: Optional[Path]) -> int:
    """Run ``action``, mapping library errors to exit codes and an error record."""
    try:
        action()
    except DegenerateSpace as exc:
        error, code = exc, EXIT_USAGE
    except (ShapeAnomalyError, ValueError) as exc:
        error, code = exc, EXIT_FAILURE
    else:
        return EXIT_OK
    logger.error("%s: %s", type(error).__name__, error)
    if output is not None:
        io.write_error(Path(output) / "error.yaml", error, code)
    return code


def detect(config: PipelineConfig) -> DetectionResult:
    if config.input is None:
        raise DomainError("detect needs an input file")
    series, X = io.ingest(config.input)
    pipeline = DetectionPipeline(config)
    result = pipeline.detect(series, X)
    pipeline.write(result, config.output)
    return result


def run_detect(config: PipelineConfig) -> int:
    return guarded(lambda: detect(config), config.output)


def write_dataset(dataset: LabeledDataset, out_dir) -> Tuple[Path, Path]:
    out = Path(out_dir)
    data_path = io.write_csv(dataset.data_frame(), out / "data.csv")
    labels_path = io.write_csv(dataset.labels_frame(), out / "labels.csv")
    experiment = dataset.metadata.get("_experiment")
    if experiment is not None:
        with open(out / "experiment.yaml", "w", encoding="utf-8") as handle:
            handle.write(io.schema_line())
            yaml.safe_dump(experiment, handle, sort_keys=False)
    return data_path, labels_path


def simulate(
    experiment_id: str,
    seed: int,
    out_dir,
    n_anomalies: int = 10,
    n_series: Optional[int] = None,
    n_hours: Optional[int] = None,
) -> LabeledDataset:
    overrides = {k: v for k, v in {"n_series": n_series, "n_hours": n_hours}.items() if v is not None}
    cfg = SimConfig(seed=seed, **overrides)
    dataset = build_experiment(experiment_id, seed=seed, n_anomalies=n_anomalies, cfg=cfg)
    write_dataset(dataset, out_dir)
    return dataset


def benchmark(config: PipelineConfig, labels_path) -> MetricsReport:
    """Detect on a labeled dataset and compare the ranking with the labels."""
    if config.input is None:
        raise DomainError("benchmark needs an input file")
    series, X = io.ingest(config.input)
    labels = io.read_labels(labels_path, [s.series_id for s in series])
    pipeline = DetectionPipeline(config)
    result = pipeline.detect(series, X)
    pipeline.write(result, config.output)
    truth = {sid for sid, label in labels.items() if label == ANOMALY}
    unscored = truth - set(result.ranked_ids)
    if unscored:
        raise LabelMismatch(f"anomalies {sorted(unscored)} could not be scored")
    report = evaluate(result.ranked_ids, truth, config.top_k)
    io.write_csv(pd.DataFrame([report.as_dict()]), Path(config.output) / "benchmark.csv")
    return report


def benchmark_dataset(
    dataset: LabeledDataset,
    config: PipelineConfig,
    show_progress: bool = False,
) -> Tuple[MetricsReport, DetectionResult]:
    X = hourly_regressors(len(dataset.series[0]), dataset.start)
    result = DetectionPipeline(config).detect(dataset.series, X, show_progress=show_progress)
    return evaluate(result.ranked_ids, set(dataset.anomalies), config.top_k), result


def experiment_benchmark(
    experiment_id: str,
    config: PipelineConfig,
    replicates: int = 3,
    anomaly_counts: Iterable[int] = (1, 5, 10),
    n_series: Optional[int] = None,
    recommended_families: bool = True,
) -> pd.DataFrame:
    """Regenerate an experiment per (count, replicate) and summarize the metrics."""
    reports = []
    for count in anomaly_counts:
        for replicate in range(replicates):
            seed = config.seed + 1000 * replicate + count
            cfg = SimConfig(seed=seed, **({"n_series": n_series} if n_series else {}))
            dataset = build_experiment(experiment_id, seed=seed, n_anomalies=count, cfg=cfg)
            run_config = config
            if recommended_families and dataset.families:
                run_config = config.model_copy(update={"families": dataset.families})
            report, _ = benchmark_dataset(dataset, run_config)
            logger.info(
                "%s count=%d replicate=%d: relative F %.3f, excess rank %.4f",
                experiment_id,
                count,
                replicate,
                report.relative_f_score,
                report.excess_rank,
            )
            reports.append(report)
    summary = summarize(reports)
    io.write_csv(summary, Path(config.output) / f"benchmark_{experiment_id.upper()}.csv")
    return summary


def score_one(space_dir, input_path, config: PipelineConfig, series_id: Optional[str] = None) -> ScoreRecord:
    """Fit the families of a persisted space to one new series and score it."""
    space = load_model_space(space_dir)
    series, X = io.ingest(input_path)
    if series_id is not None:
        series = [s for s in series if s.series_id == series_id]
    if len(series) != 1:
        raise DomainError("score-one needs exactly one series; pick one with --series-id")
    target = series[0]
    if config.rescale_means:
        target = target.rescaled(read_context(space_dir).get("target_mean"))

    specs: Dict[str, ModelFamilySpec] = {}
    for model in space.models.values():
        specs.setdefault(model.family_id, model.spec)
    fitted = DetectionPipeline(config).fit_collection([target], X, list(specs.values()), show_progress=False)
    if target.series_id not in fitted:
        raise DegenerateSpace("no family of the space could be fitted to the series")
    record = score_series(fitted[target.series_id], space)
    logger.info("%s: score %.4f (best family %s)", record.series_id, record.score, record.best_family)
    return record


def feedback(space_dir, series_id: str, label: str, out_dir=None) -> ModelSpace:
    """Apply one FP/FN label to a persisted space and write it back."""
    space = feedback_update(load_model_space(space_dir), series_id, label.upper())  # type: ignore[arg-type]
    save_model_space(space, out_dir or space_dir, context=read_context(space_dir))
    return space
