# FILE: app/services/runs.py
# ============================================================================
from pathlib import Path
from typing import List

import pandas as pd

from app.core.logging import get_logger
from app.exceptions import InvalidArgumentError, LabError, RunNotFoundError
from app.repositories.run import RunRepository
from app.schemas.experiment import CurveResponse, ExperimentConfig, RunSummary
from app.services.experiment import moving_average, run_experiment

logger = get_logger(__name__)


class RunService:
    """Service for browsing, comparing and launching experiment runs."""

    def __init__(self, repo: RunRepository):
        self.repo = repo

    def list_runs(self, skip: int = 0, limit: int = 100) -> List[RunSummary]:
        return self.repo.get_all(skip=skip, limit=limit)

    def get_run(self, run_id: str) -> RunSummary:
        summary = self.repo.get_by_id(run_id)
        if summary is None:
            raise RunNotFoundError(run_id)
        return summary

    def compare(self, run_ids: List[str]) -> List[RunSummary]:
        """Summaries ordered by descending average normalized rate; unknown ids are skipped."""
        summaries = []
        for run_id in run_ids:
            summary = self.repo.get_by_id(run_id)
            if summary is None:
                logger.warning("summary_missing", run_id=run_id)
                continue
            summaries.append(summary)
        return sorted(
            summaries,
            key=lambda s: -s.average_normalized_rate if s.average_normalized_rate is not None else float("inf"),
        )

    def curve(self, run_id: str, window: int) -> CurveResponse:
        metrics = self.repo.get_metrics(run_id)
        if metrics is None:
            raise RunNotFoundError(run_id)
        loss = pd.Series(moving_average(metrics["loss"].dropna(), window), index=metrics["loss"].dropna().index)
        loss = loss.reindex(metrics.index)
        return CurveResponse(
            run_id=run_id,
            window=window,
            frame=metrics["frame"].astype(int).tolist(),
            normalized_rate=moving_average(metrics["normalized_rate"], window).tolist(),
            loss=[None if pd.isna(v) else float(v) for v in loss],
        )

    def prepare_launch(self, config: ExperimentConfig) -> ExperimentConfig:
        """Pin the run directory under the repository root."""
        if config.out_dir is not None or config.resume is not None:
            raise InvalidArgumentError("out_dir and resume cannot be set over HTTP")
        config = config.model_copy(update={"out_dir": str(Path(self.repo.root) / config.run_id)})
        if self.repo.exists(config.run_id):
            logger.info("run_overwritten", run_id=config.run_id)
        return config

    def launch(self, config: ExperimentConfig) -> None:
        """Background entry point; failures are logged, the run directory keeps what finished."""
        try:
            run_experiment(config)
        except (LabError, OSError) as exc:
            logger.error("run_failed", run_id=config.run_id, error=str(exc))

    def delete_run(self, run_id: str) -> None:
        if not self.repo.delete(run_id):
            raise RunNotFoundError(run_id)
