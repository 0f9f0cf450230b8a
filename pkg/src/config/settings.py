"""Settings configuration using Pydantic."""
from typing import Optional
from pathlib import Path

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict
from loguru import logger

from src.utils.exceptions import ConfigError


class Settings(BaseSettings):
    """Application settings.

    Every value is a default; CLI flags override them per run.
    """

    model_config = SettingsConfigDict(
        env_file=".env",
        extra="ignore",
        case_sensitive=False,
        env_prefix="GEOSHIFT_"
    )

    # Application settings
    log_level: str = "INFO"
    log_file: Optional[Path] = None
    n_jobs: int = Field(default=1, description="Worker processes for sweep cells")

    # Density ratio estimation
    lsif_sigma: float = Field(default=2.0, description="Gaussian kernel width")
    lsif_b: int = Field(default=10, description="Number of kernel centers")
    lsif_lambda: float = Field(default=1e-3, description="L1 regularization on coefficients")
    lsif_tol: float = Field(default=1e-8, description="KKT tolerance of the QP solver")
    lsif_max_iter: int = Field(default=100_000, description="Iteration cap of the QP solver")

    # Validation
    block_side: float = Field(default=20.0, description="Block side for block cross-validation")
    dead_zone_radius: float = Field(default=0.0, description="Dead zone radius around eval samples")
    drv_exponent: float = Field(default=1.0, description="Exponent l applied to importance weights")
    knn_k: int = Field(default=5, description="Neighbors for the knn classifier")

    # Simulation
    lu_max_sites: int = Field(default=4096, description="Largest grid the LU method accepts")
    jitter_start: float = Field(default=1e-10, description="First diagonal jitter, relative to sill")
    jitter_max: float = Field(default=1e-6, description="Largest diagonal jitter, relative to sill")
    embedding_tolerance: float = Field(
        default=1e-8, description="Relative negative eigenvalue tolerated by circulant embedding"
    )
    variogram_max_iter: int = Field(default=2000, description="Function evaluations for variogram fits")

    @field_validator("lsif_sigma", "lsif_tol", "block_side", "jitter_start", "jitter_max",
                     "embedding_tolerance")
    def validate_positive_float(cls, v: float) -> float:
        """Validate strictly positive float values."""
        if v <= 0:
            raise ValueError("Value must be positive")
        return v

    @field_validator("lsif_lambda", "dead_zone_radius")
    def validate_nonnegative_float(cls, v: float) -> float:
        """Validate nonnegative float values."""
        if v < 0:
            raise ValueError("Value must be nonnegative")
        return v

    @field_validator("n_jobs", "lsif_b", "lsif_max_iter", "knn_k", "lu_max_sites",
                     "variogram_max_iter")
    def validate_positive_int(cls, v: int) -> int:
        """Validate positive integer values."""
        if v < 1:
            raise ValueError("Value must be at least 1")
        return v

    @field_validator("drv_exponent")
    def validate_exponent(cls, v: float) -> float:
        """Validate exponent between 0 and 1."""
        if not 0 <= v <= 1:
            raise ValueError("Exponent must be between 0 and 1")
        return v


def get_settings() -> Settings:
    """Get settings instance."""
    logger.debug("Loading settings from environment.")
    try:
        return Settings()
    except Exception as e:
        logger.error(f"Error loading settings: {e}")
        raise ConfigError(f"invalid GEOSHIFT_* settings: {e}") from e


# Global settings instance - lazy loading
_settings_instance = None

def get_settings_instance() -> Settings:
    """Get the global settings instance."""
    global _settings_instance
    if _settings_instance is None:
        _settings_instance = get_settings()
    return _settings_instance
