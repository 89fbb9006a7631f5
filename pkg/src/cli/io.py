"""CSV ingestion and the versioned output files."""

import logging
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np
import pandas as pd
import yaml

from src.basis.terms import RegressorMatrix, build_regressors
from src.config import settings
from src.errors import EmptySeries, InconsistentFrequency, LabelMismatch, MalformedRow
from src.series import TimeSeriesSample

logger = logging.getLogger(__name__)

REQUIRED_COLUMNS = ["series_id", "timestamp", "value"]
MISSING_MARKERS = {"", "na", "nan", "null"}
MAX_OFF_MODAL_SHARE = 0.05


def _leading_comment_lines(path: Path) -> int:
    count = 0
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if not line.startswith("#"):
                break
            count += 1
    return count


def _parse_values(frame: pd.DataFrame, first_line: int) -> np.ndarray:
    raw = frame["value"].fillna("").astype(str).str.strip()
    values = pd.to_numeric(raw.where(~raw.str.lower().isin(MISSING_MARKERS)), errors="coerce")
    bad = values.isna() & ~raw.str.lower().isin(MISSING_MARKERS)
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise MalformedRow(first_line + row, f"value {raw.iloc[row]!r} is not numeric")
    return values.to_numpy(dtype=float)


def ingest(path) -> Tuple[List[TimeSeriesSample], RegressorMatrix]:
    """Read a long-format CSV into series padded onto one regular time grid."""
    path = Path(path)
    skipped = _leading_comment_lines(path)
    frame = pd.read_csv(path, dtype=str, keep_default_na=False, skiprows=skipped)
    missing = [c for c in REQUIRED_COLUMNS if c not in frame.columns]
    if missing:
        raise MalformedRow(skipped + 1, f"header lacks columns {missing}")
    first_line = skipped + 2

    stamps = pd.to_datetime(frame["timestamp"].str.strip(), errors="coerce", format="ISO8601")
    if stamps.isna().any():
        row = int(np.flatnonzero(stamps.isna().to_numpy())[0])
        raise MalformedRow(first_line + row, f"timestamp {frame['timestamp'].iloc[row]!r} is not ISO-8601")
    if getattr(stamps.dt, "tz", None) is not None:
        stamps = stamps.dt.tz_convert("UTC").dt.tz_localize(None)
    ids = frame["series_id"].str.strip()
    if (ids == "").any():
        row = int(np.flatnonzero((ids == "").to_numpy())[0])
        raise MalformedRow(first_line + row, "empty series_id")
    values = _parse_values(frame, first_line)

    data = pd.DataFrame({"series_id": ids, "timestamp": stamps, "value": values})
    duplicated = data.duplicated(["series_id", "timestamp"])
    if duplicated.any():
        row = int(np.flatnonzero(duplicated.to_numpy())[0])
        raise MalformedRow(first_line + row, "duplicate (series_id, timestamp)")

    spacings = (
        data.sort_values(["series_id", "timestamp"])
        .groupby("series_id")["timestamp"]
        .diff()
        .dropna()
    )
    if spacings.empty:
        raise InconsistentFrequency("cannot infer a frequency from single-point series")
    modal = spacings.mode().iloc[0]
    off_modal = float((spacings != modal).mean())
    if off_modal > MAX_OFF_MODAL_SHARE:
        raise InconsistentFrequency(
            f"{off_modal:.1%} of timestamp spacings differ from the modal spacing {modal}"
        )

    grid = pd.date_range(data["timestamp"].min(), data["timestamp"].max(), freq=modal)
    off_grid = ~data["timestamp"].isin(grid)
    if off_grid.any():
        logger.warning("dropping %d observations that fall off the %s grid", int(off_grid.sum()), modal)
        data = data[~off_grid]

    series = []
    for series_id, group in data.groupby("series_id", sort=True):
        padded = group.set_index("timestamp")["value"].reindex(grid)
        if padded.notna().sum() == 0:
            raise EmptySeries(str(series_id))
        series.append(TimeSeriesSample(str(series_id), padded.to_numpy(dtype=float)))
    logger.info("ingested %d series on a %d-point grid (spacing %s)", len(series), len(grid), modal)
    return series, build_regressors(grid)


def schema_line() -> str:
    return f"# schema_version: {settings.SCHEMA_VERSION}\n"


def write_csv(frame: pd.DataFrame, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(schema_line())
        frame.to_csv(handle, index=False, float_format=settings.FLOAT_FORMAT)
    return path


def read_csv(path) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")


def write_error(path, error: BaseException, exit_code: int) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    record = {
        "error": type(error).__name__,
        "message": str(error),
        "exit_code": exit_code,
    }
    for attribute in ("line", "reason", "series_id"):
        if hasattr(error, attribute):
            record[attribute] = getattr(error, attribute)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(schema_line())
        yaml.safe_dump(record, handle, sort_keys=False)
    return path


def read_labels(path, series_ids=None) -> Dict[str, str]:
    frame = read_csv(path)
    if not {"series_id", "label"} <= set(frame.columns):
        raise LabelMismatch("labels file needs series_id and label columns")
    labels = dict(zip(frame["series_id"].astype(str), frame["label"].astype(str)))
    if series_ids is not None and set(series_ids) != set(labels):
        unlabeled = sorted(set(series_ids) - set(labels))
        unknown = sorted(set(labels) - set(series_ids))
        raise LabelMismatch(f"unlabeled series {unlabeled[:5]}, unknown labels {unknown[:5]}")
    return labels
