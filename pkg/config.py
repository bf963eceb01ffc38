"""
Configuration settings for the spin-chain discord toolkit
"""
import os
import math
from typing import Dict, Any, Tuple

from dotenv import load_dotenv

load_dotenv()


class ConfigError(ValueError):
    """Raised for malformed configuration files and invalid settings"""

    def __init__(self, message: str, line: int = 0):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


# Exact diagonalization
ENGINE_CONFIG = {
    "dense_max_sites": 12,
    "sparse_max_sites": 20,
    "degeneracy_tol": 1e-8,
    "psd_tol": 1e-10,
    "trace_tol": 1e-12,
    "eigsh_tol": 0.0,  # ARPACK: 0 means machine precision
    "default_pinning_field": 1e-6,
}

# Measurement optimization for classical correlation / discord
OPTIMIZER_CONFIG = {
    "grid_step": math.pi / 60,
    "refine_starts": 3,
    "angle_tol": 1e-7,
    "value_tol": 1e-13,
    "symmetric_grid_step": math.pi / 12,
    "outcome_floor": 1e-14,
}

# Thermodynamic-limit XY solution
CLOSED_FORM_CONFIG = {
    "quad_epsabs": 1e-12,
    "quad_epsrel": 0.0,
    "accepted_error": 1e-10,
    "quad_limit": 400,
    "r_max": 50,
}

WITNESS_CONFIG = {
    "classicality_tol": 1e-8,
}

SWEEP_CONFIG = {
    "scan_step": 0.01,
    "window_step": 0.001,
    "window_half_width": 0.05,
    "float_digits": 17,
    "energy_step": 1e-3,
    "default_workers": 1,
    "factorization_spread_tol": 5e-3,
    "relative_fit_floor": 1e-12,
}

WORKERS_ENV = "DISCORD_WORKERS"
LOG_LEVEL_ENV = "DISCORD_LOG_LEVEL"


def get_worker_count(default: int = 0) -> int:
    """Worker count for sweeps: environment override, then the given default"""
    raw = os.getenv(WORKERS_ENV)
    if raw is None or not raw.strip():
        return default or SWEEP_CONFIG["default_workers"]

    try:
        workers = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}")

    if workers < 1:
        raise ConfigError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}")

    return workers


def get_log_level() -> str:
    return os.getenv(LOG_LEVEL_ENV, "INFO").upper()


def validate_config() -> Dict[str, Any]:
    """Validate environment overrides and return status"""
    status = {
        "valid": False,
        "errors": [],
        "workers": None,
        "log_level": get_log_level(),
    }

    try:
        status["workers"] = get_worker_count()
    except ConfigError as e:
        status["errors"].append(str(e))

    if status["log_level"] not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
        status["errors"].append(f"{LOG_LEVEL_ENV} has unknown level {status['log_level']!r}")

    status["valid"] = not status["errors"]

    return status


def parse_key_value_text(text: str) -> Dict[str, Tuple[str, int]]:
    """
    Parse `key = value` lines into {key: (value, line_number)}.

    '#' starts a comment; blank lines are skipped. Keys are lower-cased.
    """
    entries: Dict[str, Tuple[str, int]] = {}

    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue

        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw_line.strip()!r}", lineno)

        key, value = (part.strip() for part in line.split("=", 1))
        key = key.lower()

        if not key:
            raise ConfigError("missing key before '='", lineno)
        if not value:
            raise ConfigError(f"missing value for {key!r}", lineno)
        if key in entries:
            raise ConfigError(f"duplicate key {key!r} (first set on line {entries[key][1]})", lineno)

        entries[key] = (value, lineno)

    return entries


def parse_float(value: str, key: str, line: int) -> float:
    try:
        number = float(value)
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {value!r}", line)

    if not math.isfinite(number):
        raise ConfigError(f"{key} must be finite, got {value!r}", line)

    return number


def parse_int(value: str, key: str, line: int) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {value!r}", line)
