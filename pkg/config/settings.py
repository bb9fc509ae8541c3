"""
Main configuration module for calib7.
Handles environment variables and numerical defaults.
"""
import math
from typing import List, Optional

from dotenv import load_dotenv
from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

load_dotenv()


class ToleranceSettings(BaseSettings):
    """Residual tolerances used by the verifiers."""
    closed_form: float = Field(default=1e-10)
    finite_difference: float = Field(default=1e-5)
    fd_step: float = Field(default=1e-5)
    lie: float = Field(default=1e-12)
    comass_slack: float = Field(default=1e-9)
    immersion_sv: float = Field(default=1e-6)
    adapted: float = Field(default=1e-4)
    round_branch: float = Field(default=1e-4)
    holomorphy: float = Field(default=1e-3)
    classification: float = Field(default=1e-6)
    phase_jump: float = Field(default=math.pi / 2)
    gauge_unitarity: float = Field(default=1e-12)
    branch_point: float = Field(default=1e-8)

    model_config = SettingsConfigDict(env_prefix="CALIB7_TOL_")

    @field_validator("*")
    @classmethod
    def _positive(cls, value: float) -> float:
        if value <= 0:
            raise ValueError("tolerances must be positive")
        return value


class GridSettings(BaseSettings):
    """Sampling grids for the built-in families."""
    base_nodes: int = Field(default=9)
    base_spacing: float = Field(default=1e-3)
    t_samples: int = Field(default=40)
    angle_samples: int = Field(default=8)
    r_grid: List[float] = Field(default=[0.5, 1.0, 2.0])
    fd_order: int = Field(default=2)
    min_nodes: int = Field(default=4)

    model_config = SettingsConfigDict(env_prefix="CALIB7_GRID_")

    @field_validator("base_nodes", "t_samples", "angle_samples")
    @classmethod
    def _enough_nodes(cls, value: int) -> int:
        if value < 4:
            raise ValueError("grids need at least 4 nodes per dimension")
        return value

    @field_validator("fd_order")
    @classmethod
    def _order(cls, value: int) -> int:
        if value not in (2, 4):
            raise ValueError("fd_order must be 2 or 4")
        return value


class SamplingSettings(BaseSettings):
    """Random sampling configuration."""
    seed: int = Field(default=1)
    comass_samples: int = Field(default=100_000)
    chunk_size: int = Field(default=4096)
    anchor_spread: float = Field(default=1e-2)
    max_redraws: int = Field(default=16)

    model_config = SettingsConfigDict(env_prefix="CALIB7_SAMPLING_")


class RuntimeSettings(BaseSettings):
    """Process-level settings; CALIB7_THREADS overrides parallelism."""
    threads: int = Field(default=1)
    output_dir: str = Field(default="out")
    metrics_path: Optional[str] = Field(default=None)

    model_config = SettingsConfigDict(env_prefix="CALIB7_")


class LoggingSettings(BaseSettings):
    """Logging configuration."""
    level: str = Field(default="INFO")
    file_path: Optional[str] = Field(default=None)
    max_file_size: int = Field(default=10485760)  # 10MB
    backup_count: int = Field(default=5)
    json_output: bool = Field(default=False)

    model_config = SettingsConfigDict(env_prefix="CALIB7_LOG_")


class Settings(BaseSettings):
    """Main settings class that combines all configuration."""

    debug: bool = Field(default=False)

    # Sub-settings
    tolerances: ToleranceSettings = ToleranceSettings()
    grid: GridSettings = GridSettings()
    sampling: SamplingSettings = SamplingSettings()
    runtime: RuntimeSettings = RuntimeSettings()
    logging: LoggingSettings = LoggingSettings()

    model_config = SettingsConfigDict(env_file=".env", case_sensitive=False, extra="ignore")


# Global settings instance
settings = Settings()
