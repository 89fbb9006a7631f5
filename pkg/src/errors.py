from typing import Optional


class ShapeAnomalyError(Exception):
    """Base class for every error raised by the library."""


class DomainError(ShapeAnomalyError, ValueError):
    """An argument lies outside the domain of a density, link or basis."""


class SupportViolation(DomainError):
    """Observations fall outside the support of the distribution family."""


class InsufficientData(ShapeAnomalyError, ValueError):
    pass


class SingularSystem(ShapeAnomalyError):
    """Penalized normal equations stayed singular after the ridge rescue."""


class EmptyEventTerm(ShapeAnomalyError):
    """A pulse/step term found no events, so the family does not apply."""


class DegenerateSpace(ShapeAnomalyError):
    """Model-space filtering left no null models."""


class UnknownSeries(ShapeAnomalyError, KeyError):
    pass


class MalformedRow(ShapeAnomalyError, ValueError):
    def __init__(self, line: int, reason: str) -> None:
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class InconsistentFrequency(ShapeAnomalyError, ValueError):
    pass


class EmptySeries(ShapeAnomalyError, ValueError):
    def __init__(self, series_id: str, reason: Optional[str] = None) -> None:
        self.series_id = series_id
        super().__init__(reason or f"series {series_id!r} has no observations")


class LabelMismatch(ShapeAnomalyError, ValueError):
    pass
