# FILE: app/core/config.py
# ============================================================================
from typing import List
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Lab settings with environment variable support."""

    # App
    APP_NAME: str = "QAROO Offloading Lab"
    DEBUG: bool = True
    ALLOWED_HOSTS: List[str] = ["*"]

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "console"

    # Output
    OUTPUT_ROOT: str = "runs"
    SMOOTHING_WINDOW: int = 200
    RUN_LAUNCH_RATE_LIMIT: str = "5/minute"

    # Solver
    SOLVER_TOL: float = 1e-6
    ENUMERATION_CAP: int = 14
    LOCAL_SEARCH_STARTS: int = 16

    # Training
    LEARNING_RATE: float = 1e-3
    REPLAY_CAPACITY: int = 1024
    BATCH_SIZE: int = 128
    TRAIN_INTERVAL: int = 10
    RNN_WINDOW: int = 10
    HIDDEN_RESET_INTERVAL: int = 1000
    CHECKPOINT_INTERVAL: int = 5000
    INPUT_SCALE: float = 1e6
    DEFAULT_SIGMA: float = 0.1

    model_config = SettingsConfigDict(
        env_file=".env",
        case_sensitive=True
    )


settings = Settings()
