import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional

import yaml

from src.config import settings
from src.gamlss.model import FittedModel
from src.model_space.binning import BinnedFamilySummary
from src.model_space.space import ModelSpace, construct_model_space

logger = logging.getLogger(__name__)

MANIFEST_FILE = "model_space.yaml"
MODELS_FILE = "models.yaml"
BINS_DIR = "bins"


def schema_header() -> str:
    return f"# schema_version: {settings.SCHEMA_VERSION}\n"


def write_yaml(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(schema_header())
        yaml.safe_dump(payload, handle, sort_keys=False, default_flow_style=None)


def read_yaml(path: Path):
    with open(path, encoding="utf-8") as handle:
        return yaml.safe_load(handle)


def _keys(keys: Iterable) -> List[List[str]]:
    return [[series_id, family_id] for series_id, family_id in sorted(keys)]


def manifest(space: ModelSpace, context: Optional[Dict] = None) -> Dict:
    return {
        "context": dict(context or {}),
        "alpha": float(space.alpha),
        "n_min": int(space.n_min),
        "null_families": sorted(space.null_families),
        "anomalous_series": sorted(space.anomalous_series),
        "normal_series": sorted(space.normal_series),
        "null_models": _keys(space.null_models),
        "feedback": {
            "forced_null": _keys(space.forced_null),
            "forced_alt": _keys(space.forced_alt),
            "whitelisted_families": sorted(space.whitelisted_families),
            "confirmed_normal": sorted(space.confirmed_normal),
            "confirmed_anomalous": sorted(space.confirmed_anomalous),
        },
    }


def save_model_space(
    space: ModelSpace,
    out_dir,
    binned: Optional[Iterable[BinnedFamilySummary]] = None,
    context: Optional[Dict] = None,
) -> Path:
    out = Path(out_dir)
    write_yaml(out / MANIFEST_FILE, manifest(space, context))
    write_yaml(out / MODELS_FILE, [space.models[key].to_record() for key in sorted(space.models)])
    for summary in binned or ():
        path = out / BINS_DIR / f"{summary.family_id}.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write(schema_header())
            summary.to_frame().to_csv(handle, index=False, float_format=settings.FLOAT_FORMAT)
    logger.info("saved model space to %s", out)
    return out


def load_model_space(in_dir) -> ModelSpace:
    """Rebuild a persisted space, re-applying its thresholds and feedback."""
    path = Path(in_dir)
    meta = read_yaml(path / MANIFEST_FILE)
    models = [FittedModel.from_record(r) for r in read_yaml(path / MODELS_FILE)]
    feedback = meta.get("feedback") or {}
    return construct_model_space(
        models,
        alpha=float(meta["alpha"]),
        n_min=int(meta["n_min"]),
        forced_null=[tuple(k) for k in feedback.get("forced_null", [])],
        forced_alt=[tuple(k) for k in feedback.get("forced_alt", [])],
        whitelisted_families=feedback.get("whitelisted_families", []),
        confirmed_normal=feedback.get("confirmed_normal", []),
        confirmed_anomalous=feedback.get("confirmed_anomalous", []),
    )


def read_context(in_dir) -> Dict:
    """Run settings stored next to a space, such as the rescaling target."""
    return read_yaml(Path(in_dir) / MANIFEST_FILE).get("context") or {}
