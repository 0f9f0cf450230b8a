"""Experiment schemas: sweep grids and result rows."""
from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.schemas.simulation import LabelingFunction

RESULT_COLUMNS = [
    "delta", "tau", "r", "model", "config", "novelty", "kl", "jaccard",
    "cv", "bcv", "drv", "drv_status", "true_error",
]


class ShiftConfig(str, Enum):
    """Overlap of the target 3-sigma circle with the source one."""
    inside = "inside"
    partial = "partial"
    outside = "outside"


class DrvStatus(str, Enum):
    """Outcome of a density ratio validation estimate."""
    ok = "ok"
    unstable = "unstable"


class TabularMode(str, Enum):
    """Domain construction for the tabular workflow."""
    shifted = "shifted"
    resampled = "resampled"


class SweepSpec(BaseModel):
    """Grid of shifts, correlation lengths and models for the Gaussian experiment."""
    model_config = ConfigDict(frozen=True)

    delta_values: List[float] = Field(min_length=1)
    tau_values: List[float] = Field(min_length=1)
    r_values: List[float] = Field(default=[0.0, 10.0, 20.0], min_length=1)
    grid_dims: Tuple[int, int] = (100, 100)
    labeling: LabelingFunction = LabelingFunction(p=1, w=4.0)
    models: List[str] = Field(default=["knn", "tree"], min_length=1)
    n_mc: int = Field(default=100, ge=1, description="Monte Carlo realizations of the target")
    seed: int = Field(default=0, ge=0)

    block_side: float = Field(default=20.0, gt=0)
    dead_zone_radius: float = Field(default=0.0, ge=0)
    lsif_sigma: float = Field(default=2.0, gt=0)
    lsif_b: int = Field(default=10, ge=1)
    lsif_lambda: float = Field(default=1e-3, ge=0)
    drv_exponent: float = Field(default=1.0, ge=0, le=1)
    normalize_weights: bool = False

    @field_validator("delta_values")
    def validate_deltas(cls, v: List[float]) -> List[float]:
        """Mean shifts live in [0, 1]."""
        if any(not 0 <= d <= 1 for d in v):
            raise ValueError("delta values must lie in [0, 1]")
        return v

    @field_validator("tau_values")
    def validate_taus(cls, v: List[float]) -> List[float]:
        """Variance shifts live in (0, 1]."""
        if any(not 0 < t <= 1 for t in v):
            raise ValueError("tau values must lie in (0, 1]")
        return v

    @field_validator("r_values")
    def validate_ranges(cls, v: List[float]) -> List[float]:
        """Correlation lengths are nonnegative."""
        if any(r < 0 for r in v):
            raise ValueError("ranges must be nonnegative")
        return v


class ResultRow(BaseModel):
    """One (delta, tau, r, model) cell of the sweep."""

    delta: float
    tau: float
    r: float
    model: str
    config: ShiftConfig
    novelty: float
    kl: float
    jaccard: float
    cv: float
    bcv: float
    drv: Optional[float] = None
    drv_status: DrvStatus = DrvStatus.ok
    true_error: float

    @field_validator("cv", "bcv", "true_error")
    def validate_loss(cls, v: float) -> float:
        """Unweighted 0-1 losses are rates."""
        if not 0 <= v <= 1:
            raise ValueError("0-1 loss estimates must lie in [0, 1]")
        return v
