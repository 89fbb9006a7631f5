"""Labeled synthetic collections for the benchmark experiments E1-E6."""

import json
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.config import settings
from src.errors import DomainError
from src.series import TimeSeriesSample
from src.simulation.generators import (
    PathComponents,
    compose_path,
    gen_ar,
    gen_double_seasonal,
    gen_linear_step,
    gen_local_level,
    gen_random_pulse,
    gen_random_walk_drift,
    gen_temporary_shift,
)
from src.simulation.priors import (
    SimConfig,
    noise_sd,
    sample_ar_coefficients,
    sample_ar_order,
    sample_cv,
    sample_initial_level,
    sample_scale_shape,
    sample_step,
    uniform,
)

logger = logging.getLogger(__name__)

NORMAL = "normal"
ANOMALY = "anomaly"
ANOMALY_COUNTS = (1, 5, 10)
GRID_START = "2024-01-01"

EXPERIMENTS: Dict[str, Dict] = {
    "E1": {
        "description": "multiple seasonality only, low and mid constant scale/shape",
        "subspaces": [("seasonal", "low"), ("seasonal", "mid")],
        "families": None,
        "seasonal_anomalies": True,
    },
    "E2": {
        "description": "seasonality, local level with pulses, AR(p) and upward shifts",
        "subspaces": [
            ("seasonal", "low"),
            ("seasonal", "mid"),
            ("pulse", "low"),
            ("pulse", "mid"),
            ("ar", "low"),
            ("step", "low"),
        ],
        "families": None,
        "seasonal_anomalies": True,
    },
    "E3": {
        "description": "constant location with extra temporary-shift anomalies",
        "subspaces": [("constant", "low")],
        "families": None,
        "seasonal_anomalies": False,
        "extra_shift_anomalies": 10,
    },
    "E4": {
        "description": "constant location, generic penalized B-spline model space",
        "subspaces": [("constant", "low")],
        "families": ["constant-bccg", "generic-pspline"],
        "seasonal_anomalies": False,
    },
    "E5": {
        "description": "all E2 bases plus a local level, generic penalized B-spline model space",
        "subspaces": [
            ("seasonal", "low"),
            ("seasonal", "mid"),
            ("pulse", "low"),
            ("pulse", "mid"),
            ("ar", "low"),
            ("step", "low"),
            ("level", "low"),
        ],
        "families": ["constant-bccg", "generic-pspline"],
        "seasonal_anomalies": True,
    },
    "E6": {
        "description": "constant location fitted with Gaussian and Student-t random walks",
        "subspaces": [("constant", "low")],
        "families": ["rw-normal", "rw-t"],
        "seasonal_anomalies": False,
    },
}


@dataclass
class LabeledDataset:
    experiment: str
    series: List[TimeSeriesSample]
    labels: Dict[str, str]
    metadata: Dict[str, Dict] = field(default_factory=dict)
    families: Optional[List[str]] = None
    start: str = GRID_START

    def __post_init__(self) -> None:
        ids = {s.series_id for s in self.series}
        if ids != set(self.labels):
            raise DomainError("labels must cover exactly the generated series")

    @property
    def anomalies(self) -> List[str]:
        return sorted(sid for sid, label in self.labels.items() if label == ANOMALY)

    @property
    def timestamps(self) -> pd.DatetimeIndex:
        return pd.date_range(self.start, periods=len(self.series[0]), freq="h")

    def data_frame(self) -> pd.DataFrame:
        stamps = self.timestamps.strftime("%Y-%m-%dT%H:%M:%S")
        frames = [
            pd.DataFrame({"series_id": s.series_id, "timestamp": stamps, "value": s.values})
            for s in self.series
        ]
        return pd.concat(frames, ignore_index=True)

    def labels_frame(self) -> pd.DataFrame:
        rows = [
            {
                "series_id": sid,
                "label": self.labels[sid],
                "metadata": json.dumps(self.metadata.get(sid, {}), sort_keys=True),
            }
            for sid in sorted(self.labels)
        ]
        return pd.DataFrame(rows, columns=["series_id", "label", "metadata"])


def _series_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def _subspace_sizes(rng, n_normal: int, n_subspaces: int, minimum: int) -> List[int]:
    spare = n_normal - minimum * n_subspaces
    if spare < 0:
        raise DomainError(
            f"{n_normal} normal series cannot fill {n_subspaces} subspaces of {minimum}"
        )
    extra = rng.multinomial(spare, rng.dirichlet(np.ones(n_subspaces)))
    return [minimum + int(e) for e in extra]


def normal_components(
    location_class: str,
    setting: str,
    cfg: SimConfig,
    rng: np.random.Generator,
) -> Tuple[PathComponents, Dict]:
    """Location, scale and shape paths for one normal series of a subspace."""
    n = cfg.n_hours
    cv = sample_cv(rng, cfg)
    initial_level = sample_initial_level(rng, cfg)
    sd = noise_sd(cv, initial_level)
    scale, shape = sample_scale_shape(rng, cfg, setting)
    meta: Dict = {
        "location": location_class,
        "setting": setting,
        "cv": cv,
        "initial_level": initial_level,
        "scale": scale,
        "shape": shape,
    }

    if location_class == "constant":
        return PathComponents(np.full(n, initial_level), None, scale, shape), meta

    alpha = uniform(rng, cfg.level_alpha)
    level = gen_local_level(n, initial_level, alpha, sd, rng)
    meta["alpha"] = alpha
    seasonal = None
    if location_class == "seasonal":
        gamma1, gamma2 = uniform(rng, cfg.seasonal_gamma), uniform(rng, cfg.seasonal_gamma)
        seasonal = gen_double_seasonal(n, initial_level, gamma1, gamma2, sd, rng) / initial_level
        meta.update(gamma1=gamma1, gamma2=gamma2)
    elif location_class == "pulse":
        rate = max(uniform(rng, cfg.pulse_rate), 1.0 / n)
        ratio = uniform(rng, cfg.pulse_ratio)
        level = level + gen_random_pulse(n, rate, level, ratio, rng)
        meta.update(pulse_rate=rate, pulse_ratio=ratio)
    elif location_class == "ar":
        order = max(1, sample_ar_order(rng, cfg))
        phi = sample_ar_coefficients(rng, cfg, order)
        level = level + gen_ar(n, phi, sd, rng)
        meta.update(ar_phi=phi)
    elif location_class == "step":
        taus, ratios = sample_step(rng, cfg, force=True, upward=True)
        level = level + gen_linear_step(n, taus, [(r - 1.0) * initial_level for r in ratios])
        meta.update(step_tau=taus, step_ratio=ratios)
    elif location_class == "level":
        drift = uniform(rng, cfg.drift_ratio) * initial_level
        level = level + gen_random_walk_drift(n, 0.0, drift, sd, rng)
        meta.update(drift=drift)
    else:
        raise DomainError(f"unknown location class {location_class!r}")
    return PathComponents(np.maximum(level, 1e-3 * initial_level), seasonal, scale, shape), meta


def _anomaly_pool(cfg: SimConfig, rng: np.random.Generator, size: int = 4) -> Dict[str, List[np.ndarray]]:
    """Extreme location ingredients relative to a unit level."""
    n = cfg.n_hours
    walks, drops = [], []
    for _ in range(size):
        walk_sd = uniform(rng, cfg.anomaly_walk_sd)
        drift = uniform(rng, cfg.drift_ratio) * rng.choice([-1.0, 1.0])
        walks.append(np.exp(gen_random_walk_drift(n, 0.0, drift, walk_sd, rng)))
        taus, ratios = sample_step(rng, cfg, force=True, upward=False)
        drops.append(1.0 + gen_linear_step(n, taus, [r - 1.0 for r in ratios]))
    return {"random_walk": walks, "downward_shift": drops}


def gen_anomalies(
    pool: Dict[str, List[np.ndarray]],
    k: int,
    seed,
    cfg: Optional[SimConfig] = None,
    seasonal_pool: Optional[Sequence[np.ndarray]] = None,
) -> List[Tuple[PathComponents, Dict]]:
    """Composite anomalies from random convex recombinations of pool members.

    Every anomaly takes its location from at least two members of one
    extreme location class; an increasing scale and an extreme shape are
    each added with probability ``anomaly_extra_probability``.
    """
    cfg = cfg or SimConfig()
    rng = np.random.default_rng(seed)
    classes = sorted(pool)
    for name in classes:
        if len(pool[name]) < 2:
            raise DomainError(f"anomaly pool needs two members of {name!r}")
    n = cfg.n_hours
    out = []
    for _ in range(k):
        initial_level = sample_initial_level(rng, cfg)
        ingredient = classes[int(rng.integers(len(classes)))]
        members = rng.choice(len(pool[ingredient]), size=2, replace=False)
        weights = rng.dirichlet(np.ones(2))
        shape_path = sum(w * pool[ingredient][m] for w, m in zip(weights, members))
        scale, shape = sample_scale_shape(rng, cfg, "low")
        ingredients = [ingredient]
        if rng.uniform() < cfg.anomaly_extra_probability:
            growth = uniform(rng, cfg.anomaly_scale_growth)
            scale = scale * np.exp(gen_random_walk_drift(n, 0.0, np.log(growth) / n, 0.002, rng))
            ingredients.append("increasing_scale")
        if rng.uniform() < cfg.anomaly_extra_probability:
            shape = uniform(rng, cfg.anomaly_shape)
            ingredients.append("extreme_shape")
        seasonal = None
        if seasonal_pool:
            seasonal = seasonal_pool[int(rng.integers(len(seasonal_pool)))]
        meta = {
            "location": "anomaly",
            "ingredients": ingredients,
            "initial_level": initial_level,
            "weights": [float(w) for w in weights],
        }
        out.append((PathComponents(initial_level * shape_path, seasonal, scale, shape), meta))
    return out


def _shift_anomaly(cfg: SimConfig, rng: np.random.Generator) -> Tuple[PathComponents, Dict]:
    n = cfg.n_hours
    initial_level = sample_initial_level(rng, cfg)
    taus = sorted(rng.choice(np.arange(cfg.step_tau[0], cfg.step_tau[1] + 1), size=3, replace=False))
    up = uniform(rng, (1.5, 2.5))
    final = uniform(rng, (0.6, 0.8))
    level = gen_temporary_shift(n, initial_level, taus, [up, 1.0, final])
    scale, shape = sample_scale_shape(rng, cfg, "low")
    meta = {
        "location": "temporary_shift",
        "ingredients": ["changepoints"],
        "changepoints": [int(t) for t in taus],
        "initial_level": initial_level,
    }
    return PathComponents(level, None, scale, shape), meta


def build_experiment(
    experiment_id: str,
    seed: int = 0,
    n_anomalies: int = 10,
    cfg: Optional[SimConfig] = None,
) -> LabeledDataset:
    """Generate the labeled collection of one experiment, deterministic per seed."""
    experiment_id = experiment_id.upper()
    if experiment_id not in EXPERIMENTS:
        raise DomainError(f"unknown experiment {experiment_id!r}; expected one of {sorted(EXPERIMENTS)}")
    if n_anomalies not in ANOMALY_COUNTS:
        raise DomainError(f"n_anomalies must be one of {ANOMALY_COUNTS}")
    cfg = cfg or SimConfig(seed=seed)
    recipe = EXPERIMENTS[experiment_id]
    rng = np.random.default_rng(np.random.SeedSequence([seed, 10_000]))

    total_anomalies = n_anomalies + recipe.get("extra_shift_anomalies", 0)
    n_normal = cfg.n_series - total_anomalies
    sizes = _subspace_sizes(rng, n_normal, len(recipe["subspaces"]), cfg.min_subspace_size)

    generated: List[Tuple[PathComponents, Dict, str]] = []
    index = 0
    seasonal_pool = []
    for (location_class, setting), size in zip(recipe["subspaces"], sizes):
        for _ in range(size):
            components, meta = normal_components(location_class, setting, cfg, _series_rng(seed, index))
            meta["subspace"] = f"{location_class}-{setting}"
            if components.seasonal is not None:
                seasonal_pool.append(components.seasonal)
            generated.append((components, meta, NORMAL))
            index += 1

    pool = _anomaly_pool(cfg, rng)
    anomalies = gen_anomalies(
        pool,
        n_anomalies,
        np.random.SeedSequence([seed, 20_000]),
        cfg,
        seasonal_pool if recipe["seasonal_anomalies"] else None,
    )
    for _ in range(recipe.get("extra_shift_anomalies", 0)):
        anomalies.append(_shift_anomaly(cfg, rng))
    for components, meta in anomalies:
        generated.append((components, meta, ANOMALY))

    order = rng.permutation(len(generated))
    width = max(4, len(str(len(generated))))
    series, labels, metadata = [], {}, {}
    for position, source in enumerate(order):
        components, meta, label = generated[source]
        series_id = f"s{position:0{width}d}"
        sample = compose_path(components, "BCCG", _series_rng(seed, 50_000 + position), series_id, meta)
        series.append(sample)
        labels[series_id] = label
        metadata[series_id] = meta
    logger.info(
        "%s: %d series, %d anomalies, subspaces %s",
        experiment_id,
        len(series),
        total_anomalies,
        dict(zip(["-".join(s) for s in recipe["subspaces"]], sizes)),
    )
    families = recipe["families"] or list(settings.DEFAULT_FAMILIES)
    dataset = LabeledDataset(experiment_id, series, labels, metadata, families)
    dataset.metadata["_experiment"] = {
        "id": experiment_id,
        "description": recipe["description"],
        "subspaces": ["-".join(s) for s in recipe["subspaces"]],
        "families": families,
        "seed": seed,
        "n_anomalies": total_anomalies,
    }
    return dataset
