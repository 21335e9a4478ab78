"""
Configuration management using Pydantic Settings.

Values come from the defaults below or from explicit keyword overrides; the lab
reads no environment variables and no dotenv files.
"""
from typing import Tuple

from pydantic import Field
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict


class LabSettings(BaseSettings):
    """Library-wide defaults for the scenario-tree lab."""

    model_config = SettingsConfigDict(case_sensitive=False, extra="ignore", populate_by_name=True)

    # Application Settings
    app_name: str = Field(default="bdsvie-lab", alias="APP_NAME")
    app_version: str = Field(default="1.0.0", alias="APP_VERSION")

    # Tree Settings
    memory_guard: int = Field(default=10, ge=1, alias="MEMORY_GUARD")  # 4^N atoms per full field

    # Tolerances
    measurability_tol: float = Field(default=1e-12, gt=0, alias="MEASURABILITY_TOL")
    reconstruction_tol: float = Field(default=1e-10, gt=0, alias="RECONSTRUCTION_TOL")
    structural_tol: float = Field(default=1e-10, gt=0, alias="STRUCTURAL_TOL")

    # BDSDE inner solver
    inner_tol: float = Field(default=1e-12, gt=0, alias="INNER_TOL")
    inner_max: int = Field(default=100, ge=1, alias="INNER_MAX")

    # Picard iteration
    picard_tol: float = Field(default=1e-10, gt=0, alias="PICARD_TOL")
    picard_max: int = Field(default=200, ge=1, alias="PICARD_MAX")
    beta_retry_cap: int = Field(default=12, ge=0, alias="BETA_RETRY_CAP")
    contraction_target: float = Field(default=0.9, gt=0, lt=1, alias="CONTRACTION_TARGET")

    # Coefficient verification
    lipschitz_samples: int = Field(default=64, ge=1, alias="LIPSCHITZ_SAMPLES")
    lipschitz_tol: float = Field(default=1e-9, ge=0, alias="LIPSCHITZ_TOL")

    # Logging
    log_level: str = Field(default="INFO", alias="LOG_LEVEL")

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        """Only explicit keyword arguments override the defaults."""
        return (init_settings,)


# Singleton instance
settings = LabSettings()
