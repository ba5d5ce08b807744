"""
Exception hierarchy for gmdiffuse.

Every error raised by the library derives from GmdiffuseError and can render
itself as the status dict the CLI prints on failure:

    {"status": "failed", "error": <code>, "message": <text>, ...context}

Validation-type errors also subclass ValueError so callers that only care
about "bad input" can catch the builtin.
"""

from typing import Any, Dict, Optional


class GmdiffuseError(Exception):
    """Base class for all gmdiffuse failures."""

    code = "gmdiffuse_error"

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context: Dict[str, Any] = {k: v for k, v in context.items() if v is not None}

    def to_dict(self) -> Dict[str, Any]:
        """Machine-readable form for error JSON."""
        payload: Dict[str, Any] = {
            "status": "failed",
            "error": self.code,
            "message": self.message,
        }
        payload.update(self.context)
        return payload

    def __repr__(self) -> str:
        return f"<{self.__class__.__name__}(code={self.code}, message={self.message!r})>"


class InvalidParameterError(GmdiffuseError, ValueError):
    """A precondition on an argument does not hold."""

    code = "invalid_parameter"


class BasisTooLargeError(InvalidParameterError):
    """C(n+d, d) exceeds the configured basis cap."""

    code = "basis_too_large"


class ScheduleError(InvalidParameterError):
    """Noise schedule parameters are out of range or inconsistent."""

    code = "invalid_schedule"


class CellFitError(InvalidParameterError):
    """Regression inputs for a Voronoi cell are empty or mismatched."""

    code = "cell_fit_failed"


class InsufficientSamplesError(GmdiffuseError):
    """Not enough samples for a warm-start refresh, or the source ran dry."""

    code = "insufficient_samples"

    def __init__(self, message: str, level: Optional[int] = None, **context: Any):
        super().__init__(message, level=level, **context)
        self.level = level


class ScoreEvaluationError(GmdiffuseError):
    """A score estimate raised or produced non-finite output."""

    code = "score_evaluation_failed"

    def __init__(self, message: str, index: Optional[int] = None, **context: Any):
        super().__init__(message, index=index, **context)
        self.index = index


class MissingScoreError(GmdiffuseError):
    """generate() was given no score estimate for a required time."""

    code = "missing_score"


class OracleUnavailableError(GmdiffuseError):
    """Exact oracles need a discrete mixing measure."""

    code = "oracle_unavailable"


class TrajectoryDivergedError(GmdiffuseError):
    """A reverse trajectory produced non-finite states."""

    code = "trajectory_diverged"


class ConfigError(GmdiffuseError):
    """Run configuration is invalid (unknown key, wrong type, bad value)."""

    code = "invalid_config"

    def __init__(self, message: str, key: Optional[str] = None, **context: Any):
        super().__init__(message, key=key, **context)
        self.key = key


class ArtifactError(GmdiffuseError):
    """A run directory or data file is missing or malformed."""

    code = "invalid_artifact"


# Export error types
__all__ = [
    "GmdiffuseError",
    "InvalidParameterError",
    "BasisTooLargeError",
    "ScheduleError",
    "CellFitError",
    "InsufficientSamplesError",
    "ScoreEvaluationError",
    "MissingScoreError",
    "OracleUnavailableError",
    "TrajectoryDivergedError",
    "ConfigError",
    "ArtifactError",
]
