from typing import Optional

from pydantic import BaseModel, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from qdiana.utils.enums import LogLevel


class RuntimeSettings(BaseSettings):
    log_level: LogLevel = LogLevel.INFO
    threads: int = 1
    divergence_threshold: float = 1e300
    reference_tol: float = 1e-12
    reference_max_iters: int = 200_000

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="QDIANA_",
        extra="ignore"
    )

    @field_validator("log_level", mode="before")  # noqa
    @classmethod
    def parse_log_level(cls, value):
        if isinstance(value, str):
            return value.upper()

        return value


class LedgerSettings(BaseSettings):
    float_bits: int = 64
    index_bits: Optional[int] = None

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="LEDGER_",
        extra="ignore"
    )


class VerifySettings(BaseSettings):
    samples: int = 100_000
    quick_samples: int = 20_000
    vectors: int = 50
    quick_vectors: int = 5
    contraction_seeds: int = 500
    quick_contraction_seeds: int = 200
    trajectory_seeds: int = 30
    quick_trajectory_seeds: int = 3
    rate_seeds: int = 5
    quick_rate_seeds: int = 1
    seed: int = 12345

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="VERIFY_",
        extra="ignore"
    )


class MainSettings(BaseModel):
    runtime: RuntimeSettings = RuntimeSettings()
    ledger: LedgerSettings = LedgerSettings()
    verify: VerifySettings = VerifySettings()


settings = MainSettings()
