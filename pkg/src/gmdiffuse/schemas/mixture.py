"""
Pydantic schemas for mixture specifications.

MixtureSpec describes P_0 = Q_0 * N(0, sigma0_sq I_n): a list of weighted
component means (the mixing measure Q_0), the base noise variance, and the
k-locality parameters the learner relies on.

Structural checks (dimensions, weights, finiteness) happen at construction.
The k-locality clauses themselves are data, reported by
services.mixture_model.validate_k_locality.
"""

import enum
import math
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


# Weights must sum to one within this tolerance
WEIGHT_SUM_TOLERANCE = 1e-12


class KLocalityParams(BaseModel):
    """k balls of radius R0, each point carrying alpha_min nearby mass, all inside B_D(0)."""

    model_config = ConfigDict(
        extra="forbid",
        frozen=True,
        json_schema_extra={"example": {"R0": 1.0, "alpha_min": 0.5, "D": 10.0, "k": 2}},
    )

    R0: float = Field(..., description="Ball radius (at least 1)", ge=1.0)
    alpha_min: float = Field(..., description="Minimum mass near every support point", gt=0.0, le=1.0)
    D: float = Field(..., description="Support radius around the origin", gt=0.0)
    k: int = Field(..., description="Number of covering balls", ge=1)


class MixtureComponent(BaseModel):
    """One atom of the mixing measure, optionally spread uniformly over a ball."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    mean: List[float] = Field(..., description="Component mean (length n)", min_length=1)
    weight: float = Field(..., description="Mixing weight", gt=0.0, le=1.0)
    radius: float = Field(
        0.0,
        description="Ball radius for generalized components (0 = point mass)",
        ge=0.0,
    )

    @field_validator("mean")
    @classmethod
    def validate_mean(cls, v):
        """Reject NaN and infinite coordinates."""
        if not all(math.isfinite(x) for x in v):
            raise ValueError(f"mean has non-finite coordinates: {v}")
        return v

    @property
    def is_atom(self) -> bool:
        return self.radius == 0.0


class MixtureSpec(BaseModel):
    """Schema for a mixture of identity-covariance Gaussians."""

    model_config = ConfigDict(
        extra="forbid",
        frozen=True,
        json_schema_extra={
            "example": {
                "n": 1,
                "sigma0_sq": 1.0,
                "components": [
                    {"mean": [-4.0], "weight": 0.5},
                    {"mean": [4.0], "weight": 0.5},
                ],
                "locality": {"R0": 1.0, "alpha_min": 0.5, "D": 4.0, "k": 2},
            }
        },
    )

    n: int = Field(..., description="Ambient dimension", ge=1)
    sigma0_sq: float = Field(..., description="Base noise variance", gt=0.0)
    components: List[MixtureComponent] = Field(..., min_length=1)
    locality: KLocalityParams

    @model_validator(mode="after")
    def validate_structure(self):
        """Dimensions match n and weights sum to one."""
        for j, component in enumerate(self.components):
            if len(component.mean) != self.n:
                raise ValueError(
                    f"component {j} mean has length {len(component.mean)}, expected n={self.n}"
                )

        total = math.fsum(c.weight for c in self.components)
        if abs(total - 1.0) > WEIGHT_SUM_TOLERANCE:
            raise ValueError(f"weights sum to {total!r}, expected 1 within {WEIGHT_SUM_TOLERANCE}")

        if not math.isfinite(self.sigma0_sq):
            raise ValueError("sigma0_sq must be finite")
        return self

    @property
    def k_components(self) -> int:
        return len(self.components)

    @property
    def means(self) -> np.ndarray:
        """(k, n) array of component means."""
        return np.array([c.mean for c in self.components], dtype=float)

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components], dtype=float)

    @property
    def radii(self) -> np.ndarray:
        return np.array([c.radius for c in self.components], dtype=float)

    @property
    def is_discrete(self) -> bool:
        """True when every component is a point mass (exact oracles available)."""
        return all(c.is_atom for c in self.components)


class LocalityClause(str, enum.Enum):
    """The three k-locality clauses checked by validate_k_locality."""
    MASS = "a"      # every mean has alpha_min weight within R0
    COVER = "b"     # means coverable by k balls of radius R0
    SUPPORT = "c"   # all means inside B_D(0)


class LocalityViolation(BaseModel):
    """One violated k-locality clause."""

    model_config = ConfigDict(frozen=True)

    clause: LocalityClause
    detail: str
    component: Optional[int] = Field(None, description="Offending component index, if any")


# Export mixture schemas
__all__ = [
    "WEIGHT_SUM_TOLERANCE",
    "KLocalityParams",
    "MixtureComponent",
    "MixtureSpec",
    "LocalityClause",
    "LocalityViolation",
]
