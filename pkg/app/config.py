from __future__ import annotations
import os
from pathlib import Path
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

_NON_SECRET_KEYS = {
    "LOG_LEVEL", "LOG_FILE", "AUDIT_LOG_FILE",
    "OUTPUT_DIR", "WORKERS", "CALL_LOG",
}


def load_non_secret_env(dotenv_path: str = ".env") -> None:
    try:
        from dotenv import dotenv_values
    except Exception:
        return

    values = dotenv_values(dotenv_path)
    for k, v in values.items():
        if v is None or k not in _NON_SECRET_KEYS:
            continue
        if k not in os.environ:
            os.environ[k] = v


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="", extra="ignore")

    LOG_LEVEL: str = "INFO"
    LOG_FILE: str = "logs/app.log"
    AUDIT_LOG_FILE: str = "logs/audit.log"

    OUTPUT_DIR: str = "output"
    WORKERS: int = Field(default=1, ge=1)

    @property
    def output_path(self) -> Path:
        return Path(self.OUTPUT_DIR)
