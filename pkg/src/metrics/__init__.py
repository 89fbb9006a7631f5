from src.metrics.scores import (
    MetricsReport,
    correction,
    evaluate,
    excess_rank,
    precision_recall_f,
    relative_f,
    summarize,
)

__all__ = [
    "MetricsReport",
    "correction",
    "evaluate",
    "excess_rank",
    "precision_recall_f",
    "relative_f",
    "summarize",
]
