"""
Configuration Management Module
"""
from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import Field
from typing import Literal, Optional

class Settings(BaseSettings):
    """Application Configuration Class"""

    # Log Configuration
    log_level: str = Field(default="INFO", description="LOG_LEVEL")
    log_file: Optional[str] = Field(default=None, description="LOG_FILE")
    log_max_size: int = Field(default=10485760, description="LOG_MAX_SIZE")  # 10MB
    log_backup_count: int = Field(default=5, description="LOG_BACKUP_COUNT")

    # Linear algebra tolerances
    rank_tolerance: float = Field(default=1e-8, description="RANK_TOLERANCE")
    constraint_tolerance: float = Field(default=1e-10, description="CONSTRAINT_TOLERANCE")
    inconsistency_tolerance: float = Field(default=1e-8, description="INCONSISTENCY_TOLERANCE")
    projector_condition_limit: float = Field(default=1e12, description="PROJECTOR_CONDITION_LIMIT")
    kernel_tolerance: float = Field(default=1e-10, description="KERNEL_TOLERANCE")
    stabilization_recipe: Literal["diagonal", "dofi"] = Field(
        default="diagonal", description="STABILIZATION_RECIPE"
    )

    # Solver Configuration
    dense_solve_limit: int = Field(default=3000, description="DENSE_SOLVE_LIMIT")
    assembly_workers: int = Field(default=1, ge=1, description="ASSEMBLY_WORKERS")

    # Mesh generators
    perturbation_fraction: float = Field(default=0.3, ge=0.0, lt=0.5, description="PERTURBATION_FRACTION")
    hex_offset: float = Field(default=0.25, ge=0.0, lt=0.5, description="HEX_OFFSET")
    default_seed: int = Field(default=0, description="DEFAULT_SEED")

    # Output
    output_format: str = Field(default="markdown", description="OUTPUT_FORMAT")

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore"
    )

# Create Global Configuration Instance
settings = Settings()
