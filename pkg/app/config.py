"""Load configuration from environment. Defaults are desk-scale."""
import os
from typing import Optional


def _str(value: Optional[str]) -> Optional[str]:
    if value is None:
        return None
    v = (value or "").strip()
    return v if v else None


def _int(value: Optional[str], default: int) -> int:
    v = _str(value)
    try:
        return int(v) if v is not None else default
    except ValueError:
        return default


def _float(value: Optional[str], default: float) -> float:
    v = _str(value)
    try:
        return float(v) if v is not None else default
    except ValueError:
        return default


# Precision policy
SPECTRAL_DIGITS: int = _int(os.environ.get("SPECTRAL_DIGITS"), 16)
SPECTRAL_MAX_DIGITS: int = _int(os.environ.get("SPECTRAL_MAX_DIGITS"), 256)
SPECTRAL_RESIDUAL_TARGET: float = _float(os.environ.get("SPECTRAL_RESIDUAL_TARGET"), 1e-10)

# Geometry: clearance factor (× curve scale) around branch points and Q_k zeros
SPECTRAL_CLEARANCE: float = _float(os.environ.get("SPECTRAL_CLEARANCE"), 1e-3)
# "Sufficiently large lambda": |lambda| >= factor * k * max|a_ii|
SPECTRAL_LAMBDA_FACTOR: float = _float(os.environ.get("SPECTRAL_LAMBDA_FACTOR"), 10.0)

# Runs
SPECTRAL_JOBS: int = max(1, _int(os.environ.get("SPECTRAL_JOBS"), os.cpu_count() or 1))
SPECTRAL_OUTPUT_DIR: str = _str(os.environ.get("SPECTRAL_OUTPUT_DIR")) or "out"

# App
LOG_LEVEL: str = (_str(os.environ.get("LOG_LEVEL")) or "INFO").upper()
DEBUG: bool = os.environ.get("DEBUG", "").lower() in ("1", "true", "yes")
