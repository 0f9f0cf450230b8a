"""Density ratio estimation schemas."""
from pydantic import BaseModel, ConfigDict, Field


class LsifConfig(BaseModel):
    """Least squares importance fitting hyperparameters."""
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    b: int = Field(default=10, ge=1, description="Number of kernel centers drawn from the target")
    sigma: float = Field(default=2.0, gt=0, description="Gaussian kernel width")
    lambda_: float = Field(default=1e-3, ge=0, alias="lambda", description="Regularization")
    seed: int = Field(default=0, ge=0, lt=2 ** 64, description="Seed for center selection")
    solver_tol: float = Field(default=1e-8, gt=0, description="KKT tolerance")
    solver_max_iter: int = Field(default=100_000, ge=1, description="Iteration cap")
