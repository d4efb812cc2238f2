"""Settings configuration for shufflelab experiments."""

from functools import lru_cache
from typing import Literal

from dotenv import load_dotenv
from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

# Load environment variables from .env file
load_dotenv()


class LabSettings(BaseSettings):
    """Lab-wide defaults with environment variable support (prefix ``SHUFFLELAB_``)."""

    model_config = SettingsConfigDict(
        env_prefix="SHUFFLELAB_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Reproducibility
    master_seed: int = Field(
        default=20240101,
        ge=0,
        lt=2**64,
        description="Master seed every trial stream is derived from",
    )

    # Output
    log_level: str = Field(default="INFO", description="Root logging level for the CLI")
    output_format: Literal["csv", "json"] = Field(
        default="csv", description="Default format for emitted records"
    )
    record_runtime: bool = Field(
        default=False,
        description="Store per-trial wall-clock time in records (breaks byte-identical outputs)",
    )

    # Execution
    workers: int = Field(default=1, ge=1, description="Concurrent trials")

    # Linear scheme decoder
    linear_epsilon: float = Field(
        default=0.1, gt=0.0, lt=1.0, description="Cluster-count window half-width"
    )
    max_partitions: int = Field(
        default=200_000, ge=1, description="Clique partitions enumerated before giving up"
    )

    # Clustering pipeline
    lsh_k_binary: int = Field(default=12, ge=1, description="k-mer length for binary reads")
    lsh_k_quaternary: int = Field(default=8, ge=1, description="k-mer length for DNA reads")
    lsh_hashes: int = Field(default=128, ge=1, description="MinHash functions per signature")
    lsh_bands: int = Field(default=64, ge=1, description="LSH bands")
    lsh_rows: int = Field(default=2, ge=1, description="Signature rows per band")
    align_band: int = Field(default=8, ge=0, description="Alignment band half-width")
    match_threshold: float = Field(
        default=0.75, gt=0.0, le=1.0, description="Matched-symbol fraction to keep a pair"
    )

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Accept the standard logging level names in any case."""
        level = v.upper()
        if level not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"unknown log level {v!r}")
        return level


@lru_cache(maxsize=1)
def load_settings() -> LabSettings:
    """Load settings with proper error handling."""
    try:
        return LabSettings()
    except Exception as e:
        error_msg = f"Failed to load settings: {e}"
        if "master_seed" in str(e).lower():
            error_msg += "\nSHUFFLELAB_MASTER_SEED must be an integer in [0, 2^64)"
        raise ValueError(error_msg) from e
