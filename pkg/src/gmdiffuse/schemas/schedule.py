"""
Pydantic schemas for the noise schedule and the KL guarantee evaluation.
"""

import math
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class NoiseSchedule(BaseModel):
    """
    Increasing time grid t_1 < ... < t_N = T with per-step error budgets.

    Construction checks only the structure (ordering, lengths, endpoint T).
    The quantitative invariants (t_1 formula, ratio condition, length bound)
    are re-verified by services.noise_schedule.check_schedule.
    """

    model_config = ConfigDict(
        extra="forbid",
        frozen=True,
        json_schema_extra={
            "example": {
                "times": [0.045, 0.9, 22.2],
                "kappa": 0.0217,
                "T": 22.2,
                "eps_budgets": [0.0283, 0.0551, 0.6533],
                "M2": 1.0,
                "n": 1,
                "eps": 0.3,
                "sigma0_sq": 1.0,
            }
        },
    )

    times: List[float] = Field(..., description="Increasing times t_1..t_N", min_length=1)
    kappa: float = Field(..., description="Step-size parameter", gt=0.0, lt=1.0)
    T: float = Field(..., description="Terminal time", gt=0.0)
    eps_budgets: List[float] = Field(..., description="Per-time score error budgets eps_k^2")
    M2: float = Field(..., description="Second moment E||x||^2", ge=0.0)
    n: int = Field(..., description="Dimension", ge=1)
    eps: float = Field(..., description="Target accuracy", gt=0.0, le=0.5)
    sigma0_sq: float = Field(..., description="Base noise variance the schedule was built for", gt=0.0)

    @model_validator(mode="after")
    def validate_structure(self):
        """Times strictly increasing, ending at T; one budget per time."""
        times = self.times
        if not all(math.isfinite(t) and t >= 0.0 for t in times):
            raise ValueError("times must be finite and nonnegative")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("times must be strictly increasing")
        if times[-1] != self.T:
            raise ValueError(f"last time {times[-1]!r} must equal T={self.T!r}")
        if len(self.eps_budgets) != len(times):
            raise ValueError(
                f"{len(self.eps_budgets)} budgets for {len(times)} times"
            )
        return self

    @property
    def N(self) -> int:
        """Number of schedule times (levels)."""
        return len(self.times)

    @property
    def t1(self) -> float:
        return self.times[0]

    @property
    def time_array(self) -> np.ndarray:
        return np.asarray(self.times, dtype=float)

    def time_at(self, level: int) -> float:
        """t_level for 1-based level index."""
        if not 1 <= level <= self.N:
            raise IndexError(f"level {level} outside 1..{self.N}")
        return self.times[level - 1]


class KLBoundReport(BaseModel):
    """Terms of the KL guarantee for a schedule, unit constants."""

    initialization: float = Field(..., description="(n + M2) / (T + 1)")
    score: float = Field(..., description="sum_k ln((t_{k+1}+1)/(t_k+1)) e_{k+1} / (t_k+1)")
    discretization_log: float = Field(..., description="kappa n ln(T + 1)")
    discretization_steps: float = Field(..., description="kappa^2 n N")
    discretization_moment: float = Field(..., description="kappa M2")
    total: float
    used_measured_errors: bool = Field(
        False, description="True when measured score errors replaced the budgets"
    )
    levels: Optional[int] = None


# Export schedule schemas
__all__ = ["NoiseSchedule", "KLBoundReport"]
