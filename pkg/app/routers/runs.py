# FILE: app/routers/runs.py
# ============================================================================
from typing import List

from fastapi import APIRouter, BackgroundTasks, Depends, Query, Request, status

from app.core.config import settings
from app.core.dependencies import get_run_service
from app.core.rate_limit import limiter
from app.schemas.experiment import CurveResponse, ExperimentConfig, RunLaunchResponse, RunSummary
from app.services.runs import RunService

router = APIRouter(prefix="/runs", tags=["Runs"])


@router.get("", response_model=List[RunSummary])
async def list_runs(
    skip: int = Query(0, ge=0),
    limit: int = Query(100, ge=1, le=1000),
    service: RunService = Depends(get_run_service),
):
    """List run summaries."""
    return service.list_runs(skip=skip, limit=limit)


@router.get("/compare", response_model=List[RunSummary])
async def compare_runs(
    run_ids: List[str] = Query(...),
    service: RunService = Depends(get_run_service),
):
    """Summaries of the given runs, best average normalized rate first."""
    return service.compare(run_ids)


@router.get("/{run_id}", response_model=RunSummary)
async def get_run(run_id: str, service: RunService = Depends(get_run_service)):
    return service.get_run(run_id)


@router.get("/{run_id}/curve", response_model=CurveResponse)
async def get_curve(
    run_id: str,
    window: int = Query(settings.SMOOTHING_WINDOW, ge=1),
    service: RunService = Depends(get_run_service),
):
    """Moving averages of normalized rate and training loss per frame."""
    return service.curve(run_id, window)


@router.post("", response_model=RunLaunchResponse, status_code=status.HTTP_202_ACCEPTED)
@limiter.limit(settings.RUN_LAUNCH_RATE_LIMIT)
async def launch_run(
    request: Request,
    config: ExperimentConfig,
    background_tasks: BackgroundTasks,
    service: RunService = Depends(get_run_service),
):
    """Start an experiment in the background."""
    config = service.prepare_launch(config)
    background_tasks.add_task(service.launch, config)
    return RunLaunchResponse(run_id=config.run_id, out_dir=config.out_dir)


@router.delete("/{run_id}", status_code=status.HTTP_204_NO_CONTENT)
async def delete_run(run_id: str, service: RunService = Depends(get_run_service)):
    service.delete_run(run_id)
