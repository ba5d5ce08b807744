"""
Pydantic schemas for the learning phase: training configuration and the
per-level audit record.
"""

from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field

from gmdiffuse.schemas.mixture import KLocalityParams, MixtureSpec


class TrainConfig(BaseModel):
    """
    Inputs of the learning phase.

    sigma0_sq, n and locality describe the data distribution the learner
    assumes; everything else is an algorithm or budget knob.
    """

    model_config = ConfigDict(
        extra="forbid",
        frozen=True,
        json_schema_extra={
            "example": {
                "eps": 0.3,
                "delta": 0.1,
                "degree": 4,
                "samples_per_level": 20000,
                "seed": 7,
                "sigma0_sq": 1.0,
                "n": 1,
                "locality": {"R0": 1.0, "alpha_min": 1.0, "D": 1.0, "k": 1},
            }
        },
    )

    eps: float = Field(..., description="Target accuracy", gt=0.0, le=0.5)
    delta: float = Field(0.1, description="Failure probability", gt=0.0, lt=1.0)
    degree: int = Field(4, description="Cap on the Hermite degree", ge=0)
    samples_per_level: int = Field(20000, description="Regression batch per level", ge=1)
    refresh_samples: int = Field(2000, description="Minimum warm-start refresh batch", ge=1)
    radius_constant: Optional[float] = Field(None, description="C in the refresh radius", gt=0.0)
    rounds_constant: Optional[float] = Field(None, description="C' in the round budget", gt=0.0)
    sample_constant: Optional[float] = Field(None, description="c in the refresh sample bound", gt=0.0)
    seed: int = Field(..., description="Seed for per-level noise", ge=0)
    norm_bound: Optional[float] = Field(
        None, description="Coefficient norm bound (defaults to locality.D)", gt=0.0
    )
    sigma0_sq: float = Field(..., description="Base noise variance", gt=0.0)
    n: int = Field(..., description="Dimension", ge=1)
    locality: KLocalityParams
    M2: Optional[float] = Field(None, description="Second moment; estimated when absent", ge=0.0)
    m2_samples: int = Field(10000, description="Pilot batch for estimating M2", ge=1)
    threads: Optional[int] = Field(None, description="Worker cap for per-cell fits", ge=1)

    @classmethod
    def for_mixture(cls, spec: MixtureSpec, **overrides) -> "TrainConfig":
        """Build a config whose distribution parameters come from a MixtureSpec."""
        values = {"sigma0_sq": spec.sigma0_sq, "n": spec.n, "locality": spec.locality}
        values.update(overrides)
        return cls(**values)

    @property
    def effective_norm_bound(self) -> float:
        return self.norm_bound if self.norm_bound is not None else self.locality.D


class LevelAudit(BaseModel):
    """What happened at one level of the learning loop."""

    level: int = Field(..., ge=1)
    t: float
    sigma_sq: float
    cell_count: int
    cell_sample_counts: List[int]
    cell_losses: List[Optional[float]]
    empirical_loss: float = Field(..., description="Mean squared residual over the batch")
    refreshed: bool = False
    warm_start_count: int
    warm_start_radius: float
    regression_draws: int
    refresh_draws: int = 0
    uncovered: Optional[int] = Field(None, description="Residual uncovered candidates after refresh")
    elapsed_seconds: float = 0.0


# Export training schemas
__all__ = ["TrainConfig", "LevelAudit"]
