"""
Pydantic schema for one command-line run.

A RunConfig merges a TOML/JSON config file with command-line flags. Unknown
keys are rejected; the resolved config is echoed as config.json into the
run directory.
"""

from enum import Enum
from pathlib import Path
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from gmdiffuse.schemas.mixture import KLocalityParams, MixtureSpec


class Command(str, Enum):
    """Subcommands of the gmdiffuse CLI."""

    GEN_MIXTURE = "gen-mixture"
    TRAIN = "train"
    SAMPLE = "sample"
    EVAL = "eval"
    SPECTRUM = "spectrum"


class RunConfig(BaseModel):
    """
    Fully-resolved parameters of one run.

    Paths are kept as given; each command checks the inputs it needs.
    """

    model_config = ConfigDict(
        extra="forbid",
        use_enum_values=True,
        json_schema_extra={
            "example": {
                "command": "train",
                "out": "runs/triangle",
                "seed": 7,
                "mixture": "triangle.json",
                "eps": 0.3,
                "degree": 4,
                "samples_per_level": 4000,
            }
        },
    )

    command: Command
    out: Path = Field(..., description="Run directory")
    seed: int = Field(..., description="Global seed (no wall-clock seeding)", ge=0)

    # Inputs
    mixture: Optional[Path] = Field(None, description="MixtureSpec JSON file")
    mixture_spec: Optional[MixtureSpec] = Field(None, description="Inline MixtureSpec")
    samples: Optional[Path] = Field(None, description="Training samples CSV")
    models: Optional[Path] = Field(None, description="TrainedStack directory")
    generated: Optional[Path] = Field(None, description="Generated samples CSV (eval)")
    reference: Optional[Path] = Field(None, description="Reference samples CSV (eval)")

    # Data description when training from a CSV without a mixture
    sigma0_sq: Optional[float] = Field(None, gt=0.0)
    locality: Optional[KLocalityParams] = None

    # Learning
    eps: float = Field(0.3, gt=0.0, le=0.5)
    delta: float = Field(0.1, gt=0.0, lt=1.0)
    degree: int = Field(4, ge=0)
    samples_per_level: int = Field(20000, ge=1)
    refresh_samples: int = Field(2000, ge=1)
    radius_constant: Optional[float] = Field(None, gt=0.0)
    rounds_constant: Optional[float] = Field(None, gt=0.0)
    sample_constant: Optional[float] = Field(None, gt=0.0)
    norm_bound: Optional[float] = Field(None, gt=0.0)
    M2: Optional[float] = Field(None, ge=0.0)
    m2_samples: int = Field(10000, ge=1)

    # Generation / evaluation
    count: int = Field(10000, ge=0)
    mc_count: int = Field(2000, ge=2)
    sigma_sq: float = Field(1.0, gt=0.0)
    d_max: int = Field(20, ge=0, le=60)
    center: Optional[List[float]] = None
    atoms_per_component: int = Field(64, ge=1, description="Atoms per ball when an oracle needs a discrete surrogate")

    threads: Optional[int] = Field(None, ge=1)
    log_level: Optional[str] = Field(None, pattern="^(error|info|debug)$")

    @model_validator(mode="after")
    def validate_mixture_source(self):
        """A mixture comes from a file or inline, not both."""
        if self.mixture is not None and self.mixture_spec is not None:
            raise ValueError("give either 'mixture' (a file) or 'mixture_spec' (inline), not both")
        return self


# Export run config schema
__all__ = ["Command", "RunConfig"]
