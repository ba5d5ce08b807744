"""
Pydantic schema for warm-start center sets.
"""

import math
from typing import List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.spatial.distance import pdist

from gmdiffuse.core import config


class WarmStartSet(BaseModel):
    """Centers of the current Voronoi partition with their covering radius."""

    model_config = ConfigDict(
        extra="forbid",
        frozen=True,
        json_schema_extra={
            "example": {
                "centers": [[-4.0], [4.0]],
                "radius": 8.2,
                "noise_level": 1.05,
            }
        },
    )

    centers: List[List[float]] = Field(..., description="Center points", min_length=1)
    radius: float = Field(..., description="Covering radius R~", gt=0.0)
    noise_level: float = Field(..., description="sigma^2 at which the set was produced", gt=0.0)

    @field_validator("centers")
    @classmethod
    def validate_centers(cls, v):
        """Equal dimensions and finite coordinates."""
        width = len(v[0])
        if width == 0:
            raise ValueError("centers must have at least one coordinate")
        for i, center in enumerate(v):
            if len(center) != width:
                raise ValueError(f"center {i} has length {len(center)}, expected {width}")
            if not all(math.isfinite(x) for x in center):
                raise ValueError(f"center {i} has non-finite coordinates")
        return v

    @model_validator(mode="after")
    def validate_separation(self):
        """No two centers closer than the dedup tolerance."""
        if len(self.centers) > 1:
            gaps = pdist(np.asarray(self.centers, dtype=float))
            if gaps.min() <= config.DEDUP_TOLERANCE:
                raise ValueError(
                    f"centers closer than {config.DEDUP_TOLERANCE} (min gap {gaps.min()!r})"
                )
        return self

    @property
    def n(self) -> int:
        return len(self.centers[0])

    @property
    def size(self) -> int:
        return len(self.centers)

    @property
    def center_array(self) -> np.ndarray:
        """(k', n) array of centers."""
        return np.asarray(self.centers, dtype=float)


# Export warm-start schema
__all__ = ["WarmStartSet"]
