"""
Runtime configuration
Settings are read from the environment (and a .env file when present).
"""

import logging
import os
from typing import Literal, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field

logger = logging.getLogger(__name__)


class Settings(BaseModel):
    """Tunable numerical and runtime knobs."""
    tol: float = Field(default=1e-7, gt=0)
    dense_threshold: int = Field(default=4096, ge=0)
    snap_eps: float = Field(default=1e-6, ge=0)
    trace_limit: int = Field(default=10_000, ge=0)
    enum_limit: int = Field(default=100_000, ge=1)
    max_pivots: int = Field(default=2_000_000, ge=1)
    lp_method: Literal['highs', 'simplex'] = 'highs'
    workers: int = Field(default=4, ge=1)
    log_level: str = "WARNING"

    @classmethod
    def from_env(cls) -> "Settings":
        """Build settings from RFC_* environment variables."""
        load_dotenv()
        env = {
            'tol': os.getenv('RFC_TOL'),
            'dense_threshold': os.getenv('RFC_DENSE_THRESHOLD'),
            'snap_eps': os.getenv('RFC_SNAP_EPS'),
            'trace_limit': os.getenv('RFC_TRACE_LIMIT'),
            'enum_limit': os.getenv('RFC_ENUM_LIMIT'),
            'max_pivots': os.getenv('RFC_MAX_PIVOTS'),
            'lp_method': os.getenv('RFC_LP_METHOD'),
            'workers': os.getenv('RFC_WORKERS'),
            'log_level': os.getenv('RFC_LOG_LEVEL'),
        }
        return cls(**{key: value for key, value in env.items() if value is not None})


# Global settings instance
settings: Optional[Settings] = None


def get_settings() -> Settings:
    """Get or create the global settings instance."""
    global settings
    if settings is None:
        settings = Settings.from_env()
        logger.debug(f"Loaded settings: {settings.model_dump()}")
    return settings


def configure(**overrides) -> Settings:
    """Replace the global settings, applying overrides on top of the environment."""
    global settings
    base = Settings.from_env().model_dump()
    base.update(overrides)
    settings = Settings(**base)
    return settings
