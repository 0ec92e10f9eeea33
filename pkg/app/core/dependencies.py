# FILE: app/core/dependencies.py
# ============================================================================
from pathlib import Path

from fastapi import Depends

from app.core.config import settings
from app.repositories.run import RunRepository
from app.services.runs import RunService


def get_run_repository() -> RunRepository:
    """Run repository rooted at the configured output directory."""
    return RunRepository(Path(settings.OUTPUT_ROOT))


def get_run_service(repo: RunRepository = Depends(get_run_repository)) -> RunService:
    return RunService(repo)
