from src.simulation.experiments import (
    ANOMALY,
    EXPERIMENTS,
    NORMAL,
    LabeledDataset,
    build_experiment,
    gen_anomalies,
    normal_components,
)
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
from src.simulation.priors import SimConfig

__all__ = [
    "ANOMALY",
    "EXPERIMENTS",
    "NORMAL",
    "LabeledDataset",
    "PathComponents",
    "SimConfig",
    "build_experiment",
    "compose_path",
    "gen_anomalies",
    "gen_ar",
    "gen_double_seasonal",
    "gen_linear_step",
    "gen_local_level",
    "gen_random_pulse",
    "gen_random_walk_drift",
    "gen_temporary_shift",
    "normal_components",
]
