"""Simulation schemas: covariate shift parameters, labeling functions, field specs."""
from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.schemas.spatial import RegularGrid, VariogramModel


class SimulationMethod(str, Enum):
    """Gaussian field simulation algorithms."""
    lu = "lu"
    spectral = "spectral"


class ShiftSpec(BaseModel):
    """Mean shift ``delta`` and variance shift ``tau`` between source and target.

    With the source fixed at mean 0 and standard deviation 1 the target has
    mean ``3 * sqrt(2) * delta`` on every feature and standard deviation ``tau``.
    """
    model_config = ConfigDict(frozen=True)

    delta: float = Field(ge=0, le=1, description="Mean shift")
    tau: float = Field(gt=0, le=1, description="Ratio of target to source standard deviation")


class LabelingFunction(BaseModel):
    """y = sgn(sin(w * ||x||_p)) with sgn(0) = +1."""
    model_config = ConfigDict(frozen=True)

    p: int = Field(default=1, description="Norm order")
    w: float = Field(default=4.0, gt=0, description="Angular frequency")

    @field_validator("p")
    def validate_norm(cls, v: int) -> int:
        """Only the 1- and 2-norms are supported."""
        if v not in (1, 2):
            raise ValueError("Norm order must be 1 or 2")
        return v


class SimulationSpec(BaseModel):
    """One or two Gaussian processes over a regular grid."""
    model_config = ConfigDict(frozen=True)

    grid: RegularGrid
    variogram: VariogramModel
    mean: float = 0.0
    n_processes: int = Field(default=1, ge=1)
    rho: float = Field(default=0.0, ge=-1, le=1, description="Correlation between two processes")
    method: SimulationMethod = SimulationMethod.spectral
    seed: int = Field(default=0, ge=0, lt=2 ** 64)

    @model_validator(mode="after")
    def validate_rho(self) -> "SimulationSpec":
        """Cross-correlation is only defined for a pair of processes."""
        if self.rho != 0 and self.n_processes != 2:
            raise ValueError("rho requires exactly two processes")
        return self
