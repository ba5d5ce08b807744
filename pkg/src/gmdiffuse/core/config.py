"""
Runtime settings and logging setup for gmdiffuse.

Settings come from environment variables (optionally via a .env file at the
project root) and are exposed as module-level constants. Library functions
read them at call time, so tests can monkeypatch the module attributes.

Environment Variables:
    GMDIFFUSE_LOG: error | info | debug (default: info)
    GMDIFFUSE_BASIS_CAP: maximum Hermite basis size C(n+d, d) (default: 200000)
    GMDIFFUSE_WARM_START_RADIUS_C: covering radius constant C (default: 4)
    GMDIFFUSE_WARM_START_ROUNDS_C: greedy round budget constant C' (default: 4)
    GMDIFFUSE_WARM_START_SAMPLES_C: refresh sample-count constant c (default: 10)
    GMDIFFUSE_DEDUP_TOL: minimum distance between warm-start centers (default: 1e-9)
    GMDIFFUSE_SAMPLER_BLOCK: trajectories per RNG block in generate (default: 4096)
    GMDIFFUSE_FEATURE_CHUNK: rows per feature-matrix chunk (default: 8192)
    GMDIFFUSE_THREADS: default worker cap (default: 1)
"""

import logging
import os
from typing import Any, Dict, Optional

from dotenv import load_dotenv

from gmdiffuse.core.errors import ConfigError


load_dotenv()


# Logging
LOG_LEVEL = os.getenv("GMDIFFUSE_LOG", "info").lower()

# Hermite basis
BASIS_CAP = int(os.getenv("GMDIFFUSE_BASIS_CAP", "200000"))
FEATURE_CHUNK_ROWS = int(os.getenv("GMDIFFUSE_FEATURE_CHUNK", "8192"))

# Warm starts (constants C, C', c of the refresh procedure)
WARM_START_RADIUS_C = float(os.getenv("GMDIFFUSE_WARM_START_RADIUS_C", "4.0"))
WARM_START_ROUNDS_C = float(os.getenv("GMDIFFUSE_WARM_START_ROUNDS_C", "4.0"))
WARM_START_SAMPLES_C = float(os.getenv("GMDIFFUSE_WARM_START_SAMPLES_C", "10.0"))
DEDUP_TOLERANCE = float(os.getenv("GMDIFFUSE_DEDUP_TOL", "1e-9"))

# Sampling and parallelism
SAMPLER_BLOCK_SIZE = int(os.getenv("GMDIFFUSE_SAMPLER_BLOCK", "4096"))
MAX_THREADS = int(os.getenv("GMDIFFUSE_THREADS", "1"))


LOG_LEVELS = {
    "error": logging.ERROR,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


def configure_logging(level: Optional[str] = None) -> int:
    """
    Configure root logging for a gmdiffuse process.

    Args:
        level: error, info or debug. Defaults to GMDIFFUSE_LOG.

    Returns:
        int: The numeric logging level applied

    Raises:
        ConfigError: If the level name is not recognized
    """
    name = (level or os.getenv("GMDIFFUSE_LOG", LOG_LEVEL)).lower()
    if name not in LOG_LEVELS:
        raise ConfigError(
            f"Unknown log level '{name}'. Valid: {', '.join(LOG_LEVELS)}",
            key="GMDIFFUSE_LOG",
        )

    numeric = LOG_LEVELS[name]
    logging.basicConfig(
        level=numeric,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    logging.getLogger("gmdiffuse").setLevel(numeric)
    return numeric


def get_settings_info() -> Dict[str, Any]:
    """
    Get the resolved settings for run manifests.

    Returns:
        dict: Setting name -> current value
    """
    return {
        "log_level": LOG_LEVEL,
        "basis_cap": BASIS_CAP,
        "feature_chunk_rows": FEATURE_CHUNK_ROWS,
        "warm_start_radius_c": WARM_START_RADIUS_C,
        "warm_start_rounds_c": WARM_START_ROUNDS_C,
        "warm_start_samples_c": WARM_START_SAMPLES_C,
        "dedup_tolerance": DEDUP_TOLERANCE,
        "sampler_block_size": SAMPLER_BLOCK_SIZE,
        "max_threads": MAX_THREADS,
    }


# Export settings helpers
__all__ = [
    "LOG_LEVEL",
    "BASIS_CAP",
    "FEATURE_CHUNK_ROWS",
    "WARM_START_RADIUS_C",
    "WARM_START_ROUNDS_C",
    "WARM_START_SAMPLES_C",
    "DEDUP_TOLERANCE",
    "SAMPLER_BLOCK_SIZE",
    "MAX_THREADS",
    "LOG_LEVELS",
    "configure_logging",
    "get_settings_info",
]
