from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np


@dataclass(frozen=True)
class TimeSeriesSample:
    """One series on the common time grid; NaN marks a missing value."""

    series_id: str
    values: np.ndarray
    metadata: Dict[str, Any] = field(default_factory=dict, compare=False)
    scale_factor: float = 1.0

    def __len__(self) -> int:
        return len(self.values)

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.values)

    @property
    def n_obs(self) -> int:
        return int(np.sum(~self.missing))

    def rescaled(self, target_mean: Optional[float]) -> "TimeSeriesSample":
        """Divide by the series mean and multiply by ``target_mean``."""
        if target_mean is None:
            return self
        mean = float(np.nanmean(self.values))
        factor = target_mean / mean if mean > 0 else 1.0
        return TimeSeriesSample(self.series_id, self.values * factor, self.metadata, factor)
