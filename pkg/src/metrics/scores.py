import logging
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence, Set, Tuple

import numpy as np
import pandas as pd

from src.errors import DomainError

logger = logging.getLogger(__name__)

DEFAULT_TOP_K = 10
CORRECTION_CAP = 10


def precision_recall_f(
    ranked: Sequence[str],
    truth: Iterable[str],
    top_k: int = DEFAULT_TOP_K,
) -> Tuple[float, float, float]:
    """Precision, recall and F over the ``top_k`` most anomalous series.

    ``ranked`` lists series ids from most to least anomalous. Empty truth
    gives NaN for all three.
    """
    truth = set(truth)
    if top_k > len(ranked):
        raise DomainError(f"top_k ({top_k}) exceeds the number of series ({len(ranked)})")
    if not truth:
        return float("nan"), float("nan"), float("nan")
    top = set(ranked[:top_k])
    tp = len(top & truth)
    precision = tp / top_k
    recall = tp / len(truth)
    f = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f


def correction(n_anomalies: int) -> float:
    share = min(n_anomalies, CORRECTION_CAP) / CORRECTION_CAP
    return 1.0 - 2.0 * share / (1.0 + share)


def relative_f(f: float, n_anomalies: int) -> float:
    if n_anomalies < 1:
        raise DomainError("relative_f needs at least one anomaly")
    return f + correction(n_anomalies)


def excess_rank(ranked: Sequence[str], truth: Iterable[str], n: int = 0) -> float:
    """Anomaly frequency minus the deepest rank of any true anomaly, both over N."""
    truth = set(truth)
    if not truth:
        raise DomainError("excess_rank is undefined without anomalies")
    n = n or len(ranked)
    positions = {sid: i + 1 for i, sid in enumerate(ranked)}
    missing = truth - set(positions)
    if missing:
        raise DomainError(f"anomalies {sorted(missing)} are not ranked")
    deepest = max(positions[sid] for sid in truth)
    return len(truth) / n - deepest / n


@dataclass(frozen=True)
class MetricsReport:
    precision: float
    recall: float
    f_score: float
    correction: float
    relative_f_score: float
    excess_rank: float
    top_k: int
    n_series: int
    n_anomalies: int
    defined: bool = True

    def as_dict(self):
        return asdict(self)


def evaluate(ranked: Sequence[str], truth: Set[str], top_k: int = DEFAULT_TOP_K) -> MetricsReport:
    truth = set(truth)
    n = len(ranked)
    top_k = min(top_k, n)
    if not truth:
        logger.warning("no anomalies in the truth set; metrics are undefined")
        nan = float("nan")
        return MetricsReport(nan, nan, nan, nan, nan, nan, top_k, n, 0, defined=False)
    p, r, f = precision_recall_f(ranked, truth, top_k)
    return MetricsReport(
        precision=p,
        recall=r,
        f_score=f,
        correction=correction(len(truth)),
        relative_f_score=relative_f(f, len(truth)),
        excess_rank=excess_rank(ranked, truth, n),
        top_k=top_k,
        n_series=n,
        n_anomalies=len(truth),
    )


def summarize(reports: Iterable[MetricsReport]) -> pd.DataFrame:
    """Replicate averages per anomaly count: relative F and mean |excess rank|."""
    frame = pd.DataFrame([r.as_dict() for r in reports if r.defined])
    if frame.empty:
        return pd.DataFrame(
            columns=["n_anomalies", "replicates", "f_score", "relative_f_score", "mean_abs_excess_rank"]
        )
    frame["abs_excess_rank"] = np.abs(frame["excess_rank"])
    summary = (
        frame.groupby("n_anomalies")
        .agg(
            replicates=("f_score", "size"),
            f_score=("f_score", "mean"),
            relative_f_score=("relative_f_score", "mean"),
            mean_abs_excess_rank=("abs_excess_rank", "mean"),
        )
        .reset_index()
    )
    return summary
