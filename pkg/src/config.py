import math
import os
from typing import Dict, List
from dotenv import load_dotenv
from pydantic_settings import BaseSettings, SettingsConfigDict

# Load environment variables from .env file
load_dotenv()


def _term(kind: str, **fields) -> Dict:
    return {"kind": kind, **fields}


_INTERCEPT = _term("intercept")
_HOUR = _term("cyclic_cubic", input="hour", lam=10.0)
_DOW = _term("cyclic_cubic", input="dow", lam=10.0)
_TREND = _term("pspline_linear", input="time", num_knots=20, lam="gcv")
_WALK = _term("pspline_linear", input="time", num_knots=40, lam=1.0)
_SMOOTH = _term("pspline_cubic", input="time", num_knots=12, lam="gcv")
_PULSE = _term("pulse")
_STEP = _term("step")
_AR = _term("ar", ar_order=2)
_FOURIER_DAY = _term("fourier", input="time", period=24.0, num_harmonics=2)
_FOURIER_WEEK = _term("fourier", input="time", period=168.0, num_harmonics=2)


def _family(distribution: str, location: List[Dict], **roles: List[Dict]) -> Dict:
    return {
        "distribution": distribution,
        "terms": {"mu": location, **roles},
    }


class Settings(BaseSettings):
    # Logging settings
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")

    # Model space settings
    DEFAULT_ALPHA: float = float(os.getenv("DEFAULT_ALPHA", "0.05"))
    NMIN_FLOOR: int = int(os.getenv("NMIN_FLOOR", "5"))
    NMIN_FRACTION: float = float(os.getenv("NMIN_FRACTION", "0.02"))
    DEFAULT_RHO: float = float(os.getenv("DEFAULT_RHO", "0.99"))
    DEFAULT_TOP_K: int = int(os.getenv("DEFAULT_TOP_K", "10"))
    DEFAULT_CRITERION: str = os.getenv("DEFAULT_CRITERION", "aic")

    # Execution settings
    DEFAULT_WORKERS: int = int(os.getenv("DEFAULT_WORKERS", "1"))
    DEFAULT_SEED: int = int(os.getenv("DEFAULT_SEED", "0"))

    # Fitting settings
    FIT_MAX_OUTER_ITERS: int = int(os.getenv("FIT_MAX_OUTER_ITERS", "50"))
    FIT_REL_TOL: float = float(os.getenv("FIT_REL_TOL", "1e-4"))
    FIT_MAX_INNER_SWEEPS: int = int(os.getenv("FIT_MAX_INNER_SWEEPS", "30"))
    FIT_INNER_TOL: float = float(os.getenv("FIT_INNER_TOL", "1e-6"))
    FIT_MAX_STEP_HALVINGS: int = int(os.getenv("FIT_MAX_STEP_HALVINGS", "30"))
    WEIGHT_FLOOR: float = float(os.getenv("WEIGHT_FLOOR", "1e-10"))
    RIDGE: float = float(os.getenv("RIDGE", "1e-8"))
    LAMBDA_GRID: List[float] = [10.0**k for k in range(-2, 7)]
    GCV_GAMMA: float = float(os.getenv("GCV_GAMMA", "1.0"))
    FIT_GCV_CYCLES: int = int(os.getenv("FIT_GCV_CYCLES", "10"))
    MIN_OBSERVATIONS: int = int(os.getenv("MIN_OBSERVATIONS", "30"))

    # Event detection settings
    PULSE_Z_THRESHOLD: float = float(os.getenv("PULSE_Z_THRESHOLD", "5"))
    MAX_CHANGEPOINTS: int = int(os.getenv("MAX_CHANGEPOINTS", "3"))
    STEP_MIN_SHIFT: float = float(os.getenv("STEP_MIN_SHIFT", "0.1"))
    STEP_MIN_SEGMENT: int = int(os.getenv("STEP_MIN_SEGMENT", "5"))

    # Frequency binning settings
    BIN_COUNT: int = int(os.getenv("BIN_COUNT", "20"))
    BIN_PADDING: float = float(os.getenv("BIN_PADDING", "0.05"))

    # Output settings
    SCHEMA_VERSION: int = 1
    FLOAT_FORMAT: str = "%.17g"

    # Family presets settings
    FAMILY_PRESETS: Dict[str, Dict] = {
        "constant-bccg": _family("BCCG", [_INTERCEPT]),
        "constant-gamma": _family("Gamma", [_INTERCEPT]),
        "seasonal-bccg": _family("BCCG", [_INTERCEPT, _HOUR, _DOW]),
        "seasonal-gamma": _family("Gamma", [_INTERCEPT, _HOUR, _DOW]),
        "seasonal-logt": _family("LogT", [_INTERCEPT, _HOUR, _DOW]),
        "seasonal-fourier": _family(
            "BCCG", [_INTERCEPT, _FOURIER_DAY, _FOURIER_WEEK]
        ),
        "level-pulse": _family("BCCG", [_INTERCEPT, _TREND, _PULSE]),
        "seasonal-pulse": _family("BCCG", [_INTERCEPT, _HOUR, _DOW, _PULSE]),
        "ar": _family("BCCG", [_INTERCEPT, _AR]),
        "seasonal-ar": _family("BCCG", [_INTERCEPT, _HOUR, _DOW, _AR]),
        "rw-drift": _family("BCCG", [_INTERCEPT, _HOUR, _DOW, _WALK]),
        "step": _family("BCCG", [_INTERCEPT, _HOUR, _DOW, _STEP]),
        "scale-trend": _family(
            "BCCG",
            [_INTERCEPT, _HOUR, _DOW],
            sigma=[_INTERCEPT, _term("pspline_linear", input="time", num_knots=10, lam=1.0)],
        ),
        "shape-trend": _family(
            "BCCG",
            [_INTERCEPT, _HOUR, _DOW],
            nu=[_INTERCEPT, _term("pspline_linear", input="time", num_knots=10, lam=1.0)],
        ),
        "generic-pspline": _family(
            "BCCG",
            [_INTERCEPT, _SMOOTH],
            sigma=[_INTERCEPT, _SMOOTH],
            nu=[_INTERCEPT, _SMOOTH],
        ),
        "rw-normal": _family("Normal", [_INTERCEPT, _WALK]),
        "rw-t": _family("LogT", [_INTERCEPT, _WALK]),
    }

    DEFAULT_FAMILIES: List[str] = [
        "constant-bccg",
        "seasonal-bccg",
        "seasonal-gamma",
        "seasonal-logt",
        "seasonal-fourier",
        "level-pulse",
        "seasonal-pulse",
        "ar",
        "seasonal-ar",
        "rw-drift",
        "step",
        "scale-trend",
        "shape-trend",
        "generic-pspline",
        "constant-gamma",
    ]

    def n_min_for(self, n_series: int) -> int:
        return max(self.NMIN_FLOOR, math.ceil(self.NMIN_FRACTION * n_series))

    model_config = SettingsConfigDict(
        env_file=".env", env_file_encoding="utf-8", extra="ignore"
    )


# Create a global instance of the settings
settings = Settings()
