import logging
from typing import Dict, Iterable, List, Literal, Mapping, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.basis.terms import BasisTermSpec, TermKind
from src.config import settings
from src.distributions.families import FamilyId, DistributionFamily, get_family
from src.errors import DomainError

logger = logging.getLogger(__name__)


class ModelFamilySpec(BaseModel):
    """A distribution family together with the additive terms of every parameter."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str
    distribution: FamilyId
    terms: Dict[str, List[BasisTermSpec]]
    links: Dict[str, str] = Field(default_factory=dict)

    @model_validator(mode="before")
    @classmethod
    def _fill_roles(cls, data):
        if not isinstance(data, dict):
            return data
        family = get_family(str(FamilyId(data["distribution"]).value))
        terms = dict(data.get("terms") or {})
        if not terms.get("mu"):
            raise ValueError("the location parameter needs at least one term")
        for role in family.roles:
            terms.setdefault(role, [{"kind": "intercept"}])
        extra = set(terms) - set(family.roles)
        if extra:
            raise ValueError(f"{family.name} has no parameters {sorted(extra)}")
        return {**data, "terms": terms}

    @field_validator("terms")
    @classmethod
    def _non_empty(cls, terms: Dict[str, List[BasisTermSpec]]):
        empty = [role for role, role_terms in terms.items() if not role_terms]
        if empty:
            raise ValueError(f"parameters {empty} have no terms")
        return terms

    def family(self) -> DistributionFamily:
        return get_family(self.distribution.value, self.links or None)

    def has_intercept(self, role: str) -> bool:
        return any(t.kind == TermKind.INTERCEPT for t in self.terms[role])

    def event_kinds(self) -> List[TermKind]:
        kinds = {TermKind.PULSE, TermKind.STEP}
        return [t.kind for role_terms in self.terms.values() for t in role_terms if t.kind in kinds]

    def ar_order(self) -> int:
        return max(
            (t.ar_order or 0 for t in self.terms["mu"] if t.kind == TermKind.AR),
            default=0,
        )

    def is_seasonal(self) -> bool:
        return any(
            t.input == "hour" or t.kind == TermKind.FOURIER for t in self.terms["mu"]
        )


class FitConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    criterion: Literal["aic", "bic"] = Field(default_factory=lambda: settings.DEFAULT_CRITERION)
    max_outer_iters: int = Field(default_factory=lambda: settings.FIT_MAX_OUTER_ITERS, ge=1)
    rel_tol: float = Field(default_factory=lambda: settings.FIT_REL_TOL, gt=0)
    max_inner_sweeps: int = Field(default_factory=lambda: settings.FIT_MAX_INNER_SWEEPS, ge=1)
    inner_tol: float = Field(default_factory=lambda: settings.FIT_INNER_TOL, gt=0)
    max_step_halvings: int = Field(default_factory=lambda: settings.FIT_MAX_STEP_HALVINGS, ge=0)
    lambda_grid: List[float] = Field(default_factory=lambda: list(settings.LAMBDA_GRID))
    gcv: bool = True
    gcv_gamma: float = Field(default_factory=lambda: settings.GCV_GAMMA, gt=0)
    gcv_cycles: int = Field(default_factory=lambda: settings.FIT_GCV_CYCLES, ge=1)
    weight_floor: float = Field(default_factory=lambda: settings.WEIGHT_FLOOR, gt=0)
    ridge: float = Field(default_factory=lambda: settings.RIDGE, gt=0)
    min_observations: int = Field(default_factory=lambda: settings.MIN_OBSERVATIONS, ge=1)

    @field_validator("lambda_grid")
    @classmethod
    def _positive_grid(cls, grid: List[float]) -> List[float]:
        if not grid or any(lam <= 0 for lam in grid):
            raise ValueError("lambda_grid must hold positive values")
        return sorted(grid)

    @property
    def default_lambda(self) -> float:
        return self.lambda_grid[len(self.lambda_grid) // 2]


def load_family_specs(
    names: Optional[Iterable[str]] = None,
    custom: Optional[Mapping[str, Mapping]] = None,
) -> List[ModelFamilySpec]:
    """Resolve preset names (and optional custom definitions) into specs."""
    definitions = {**settings.FAMILY_PRESETS, **(custom or {})}
    chosen = list(names) if names is not None else list(settings.DEFAULT_FAMILIES)
    if not chosen:
        raise DomainError("at least one model family is required")
    specs = []
    for name in chosen:
        if name not in definitions:
            raise DomainError(f"unknown model family {name!r}")
        specs.append(ModelFamilySpec(name=name, **definitions[name]))
    return specs
