"""
RANKFLOW Configuration Management

Centralized runtime configuration using Pydantic Settings with environment
variable support. Experiment inputs (model, sizes, seeds) live in the JSON
experiment config instead; see rankflow.schemas.experiment.
"""

from enum import Enum
from functools import lru_cache
from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class LogLevel(str, Enum):
    """Logging level."""
    DEBUG = "DEBUG"
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"
    CRITICAL = "CRITICAL"


class LogFormat(str, Enum):
    """Log rendering."""
    CONSOLE = "console"
    JSON = "json"


class SolverSettings(BaseSettings):
    """Hydrodynamic-limit solver configuration."""

    model_config = SettingsConfigDict(env_prefix="RANKFLOW_SOLVER_")

    grid_m: int = Field(default=400, ge=4, le=20000, description="Cells in y")
    grid_k: int = Field(default=400, ge=4, le=20000, description="Cells in t")
    f_tol: float = Field(default=1e-12, gt=0.0)
    g_tol: float = Field(default=1e-10, gt=0.0)
    max_iterations: int = Field(default=80, ge=1, le=10000)
    stall_limit: int = Field(
        default=5, ge=1,
        description="Consecutive non-decreasing differences tolerated before NonContraction",
    )
    tagged_steps: int = Field(default=2000, ge=10, description="RK4 steps over [0, T]")


class SimulationSettings(BaseSettings):
    """Particle simulator configuration."""

    model_config = SettingsConfigDict(env_prefix="RANKFLOW_SIM_")

    debug_invariants: bool = Field(
        default=False, description="Check the rank permutation after every accepted jump"
    )
    chunk_size: int = Field(default=4096, ge=1, le=1 << 20)
    snapshot_count: int = Field(default=17, ge=2, le=10000)


class StudySettings(BaseSettings):
    """Convergence study execution."""

    model_config = SettingsConfigDict(env_prefix="RANKFLOW_STUDY_")

    threads: int = Field(default=1, ge=1, le=256)
    record_timing: bool = Field(default=False)


class Settings(BaseSettings):
    """
    Main application settings.

    All settings are loaded from environment variables with sensible defaults.
    Use .env file for local development.
    """

    model_config = SettingsConfigDict(
        env_prefix="RANKFLOW_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    app_name: str = Field(default="rankflow")
    app_version: str = Field(default="0.1.0")

    log_level: LogLevel = Field(default=LogLevel.INFO)
    log_format: LogFormat = Field(default=LogFormat.CONSOLE)
    output_dir: Path = Field(default=Path("rankflow-out"))

    solver: SolverSettings = Field(default_factory=SolverSettings)
    simulation: SimulationSettings = Field(default_factory=SimulationSettings)
    study: StudySettings = Field(default_factory=StudySettings)


@lru_cache
def get_settings() -> Settings:
    """
    Get cached settings instance.

    Settings are loaded once and cached for the lifetime of the process.
    """
    return Settings()
