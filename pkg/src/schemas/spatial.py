"""Spatial domain schemas: regular grids and parametric variogram models."""
from enum import Enum
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class VariogramKind(str, Enum):
    """Supported variogram model families."""
    gaussian = "gaussian"
    spherical = "spherical"
    exponential = "exponential"


class RegularGrid(BaseModel):
    """Regular 2D or 3D grid of sites enumerated in column-major order."""
    model_config = ConfigDict(frozen=True)

    dims: Tuple[int, ...]
    spacing: Tuple[float, ...]
    origin: Tuple[float, ...]

    @model_validator(mode="before")
    @classmethod
    def fill_defaults(cls, data):
        """Default to unit spacing at the coordinate origin."""
        if isinstance(data, dict):
            data = dict(data)
            ndim = len(data.get("dims") or ())
            if data.get("spacing") is None:
                data["spacing"] = (1.0,) * ndim
            if data.get("origin") is None:
                data["origin"] = (0.0,) * ndim
        return data

    @field_validator("dims")
    def validate_dims(cls, v: Tuple[int, ...]) -> Tuple[int, ...]:
        """Validate axis count and positive sizes."""
        if len(v) not in (2, 3):
            raise ValueError("Grid must have 2 or 3 axes")
        if any(d < 1 for d in v):
            raise ValueError("All grid dims must be at least 1")
        return v

    @model_validator(mode="after")
    def validate_geometry(self) -> "RegularGrid":
        """Validate spacing and origin against the axis count."""
        ndim = len(self.dims)
        if len(self.spacing) != ndim or len(self.origin) != ndim:
            raise ValueError("spacing and origin must match the number of axes")
        if any(s <= 0 for s in self.spacing):
            raise ValueError("All grid spacings must be positive")
        return self

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def n_sites(self) -> int:
        return int(np.prod(self.dims))

    @property
    def extent(self) -> Tuple[float, ...]:
        """Side length covered by the sites along each axis."""
        return tuple(d * s for d, s in zip(self.dims, self.spacing))


class VariogramModel(BaseModel):
    """Nugget-free variogram with the effective-range convention.

    ``range`` is the lag at which gaussian and exponential models reach 95% of
    the sill; the spherical model reaches the sill exactly at ``range``.
    """
    model_config = ConfigDict(frozen=True)

    kind: VariogramKind = VariogramKind.gaussian
    range: float = Field(gt=0, description="Correlation length in coordinate units")
    sill: float = Field(default=1.0, gt=0, description="Total sill (process variance)")
    nugget: float = Field(default=0.0, description="Fixed at zero")

    @field_validator("nugget")
    def validate_nugget(cls, v: float) -> float:
        """Only nugget-free models are supported."""
        if v != 0:
            raise ValueError("Nugget must be zero")
        return v

    def gamma(self, h) -> np.ndarray:
        """Semivariance at lag(s) ``h``."""
        h = np.abs(np.asarray(h, dtype=float))
        scaled = h / self.range
        if self.kind == VariogramKind.gaussian:
            return self.sill * (1.0 - np.exp(-3.0 * scaled ** 2))
        if self.kind == VariogramKind.exponential:
            return self.sill * (1.0 - np.exp(-3.0 * scaled))
        inside = np.minimum(scaled, 1.0)
        return self.sill * (1.5 * inside - 0.5 * inside ** 3)

    def covariance(self, h) -> np.ndarray:
        """Covariance C(h) = sill - gamma(h)."""
        return self.sill - self.gamma(h)
