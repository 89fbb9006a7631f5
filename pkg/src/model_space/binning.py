from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.config import settings
from src.errors import DomainError
from src.gamlss.model import FittedModel


@dataclass(frozen=True)
class BinnedFamilySummary:
    family_id: str
    edges: Dict[str, np.ndarray]
    counts: Dict[str, np.ndarray]

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for name, edges in self.edges.items():
            for i, count in enumerate(self.counts[name]):
                rows.append(
                    {
                        "family_id": self.family_id,
                        "coefficient": name,
                        "bin": i,
                        "lower": edges[i],
                        "upper": edges[i + 1],
                        "count": int(count),
                    }
                )
        return pd.DataFrame(
            rows, columns=["family_id", "coefficient", "bin", "lower", "upper", "count"]
        )


def _edges(values: np.ndarray, bin_count: int, padding: float,
           value_range: Optional[Tuple[float, float]]) -> np.ndarray:
    if value_range is not None:
        lo, hi = value_range
    else:
        lo, hi = float(values.min()), float(values.max())
    span = hi - lo
    if span <= 0:
        span = max(abs(lo), 1.0)
        lo, hi = lo - 0.5 * span, hi + 0.5 * span
    pad = padding * (hi - lo)
    return np.linspace(lo - pad, hi + pad, bin_count + 1)


def bin_coefficients(
    models: Sequence[FittedModel],
    bin_count: Optional[int] = None,
    padding: Optional[float] = None,
    value_range: Optional[Tuple[float, float]] = None,
) -> BinnedFamilySummary:
    """Per-coefficient histograms over the models of one family.

    Bins are equal-width, closed on the right, with the lowest bin also
    closed on the left. Models lacking a coefficient (a different number of
    event or lag columns) simply do not contribute to it.
    """
    if not models:
        raise DomainError("bin_coefficients needs at least one model")
    families = {m.family_id for m in models}
    if len(families) > 1:
        raise DomainError(f"models span several families: {sorted(families)}")
    bin_count = settings.BIN_COUNT if bin_count is None else bin_count
    padding = settings.BIN_PADDING if padding is None else padding

    table = pd.DataFrame([m.flat_coefficients() for m in models])
    edges, counts = {}, {}
    for name in table.columns:
        values = table[name].dropna().to_numpy()
        bins = _edges(values, bin_count, padding, value_range)
        binned = pd.cut(values, bins=bins, right=True, include_lowest=True)
        edges[name] = bins
        counts[name] = pd.Series(binned).value_counts(sort=False).to_numpy()
    return BinnedFamilySummary(families.pop(), edges, counts)
