# FILE: app/services/experiment.py
# ============================================================================
"""Experiment runs and the files they leave behind.

A run directory holds:

* ``config.json``: the resolved ExperimentConfig and the SystemParams used.
* ``metrics.csv``: one row per frame with the columns in ``METRIC_COLUMNS``;
  ``loss`` is empty on frames without a training step and
  ``decision_time_s`` is empty when timing is disabled.
* ``summary.json``: a RunSummary.
* ``checkpoints/``: policy checkpoints written during the run.
"""
import json
import time
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from app.core.config import settings
from app.core.logging import get_logger
from app.exceptions import InvalidArgumentError
from app.models.experience import FrameMetrics
from app.schemas.experiment import (
    TABLE_ALGORITHMS,
    ExperimentConfig,
    RunSummary,
    resolve_system_params,
)
from app.services.trainer import build_trainer

logger = get_logger(__name__)

METRICS_SCHEMA_VERSION = 1
METRIC_COLUMNS = ["frame", "chosen_value", "reference_value", "normalized_rate", "loss", "decision_time_s"]
EARLY_FRAMES = 1000
CONVERGED_FROM = 5000

CONFIG_FILE = "config.json"
METRICS_FILE = "metrics.csv"
SUMMARY_FILE = "summary.json"
CHECKPOINT_DIR = "checkpoints"


def moving_average(series: Iterable[float], window: int) -> np.ndarray:
    """Trailing mean over min(window, index + 1) points."""
    if window < 1:
        raise InvalidArgumentError("window must be at least 1")
    values = pd.Series(list(series), dtype=float)
    return values.rolling(window, min_periods=1).mean().to_numpy()


def metrics_frame(rows: Sequence[FrameMetrics]) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "frame": [r.frame_index for r in rows],
            "chosen_value": [r.chosen_value for r in rows],
            "reference_value": [r.reference_value for r in rows],
            "normalized_rate": [r.normalized_rate for r in rows],
            "loss": [r.training_loss for r in rows],
            "decision_time_s": [r.decision_time_seconds for r in rows],
        },
        columns=METRIC_COLUMNS,
    ).astype({"frame": "int64", "chosen_value": float, "reference_value": float,
              "normalized_rate": float, "loss": float, "decision_time_s": float})


def summarize(
    config: ExperimentConfig,
    metrics: pd.DataFrame,
    total_time_s: Optional[float],
) -> RunSummary:
    def mean_or_none(column: pd.Series) -> Optional[float]:
        column = column.dropna()
        return float(column.mean()) if len(column) else None

    rates = metrics["normalized_rate"]
    late = rates[metrics["frame"] >= CONVERGED_FROM]
    losses = metrics["loss"].dropna()
    return RunSummary(
        run_id=config.run_id,
        algo=config.algo,
        devices=config.devices,
        frames=config.frames,
        seed=config.seed,
        candidates=config.candidates,
        reference=config.reference,
        average_normalized_rate=mean_or_none(rates),
        average_decision_time_s=mean_or_none(metrics["decision_time_s"]),
        total_time_s=total_time_s,
        early_normalized_rate=mean_or_none(rates.head(EARLY_FRAMES)),
        converged_rate_variance=float(late.var(ddof=0)) if len(late) else None,
        final_loss=float(moving_average(losses, config.smoothing_window)[-1]) if len(losses) else None,
    )


def resolve_out_dir(config: ExperimentConfig) -> Path:
    if config.out_dir:
        return Path(config.out_dir)
    return Path(settings.OUTPUT_ROOT) / config.run_id


def run_experiment(config: ExperimentConfig) -> Path:
    """Run one configuration and write its run directory; returns the directory.

    Frames completed before a frame error are still written, then the error
    propagates.
    """
    out_dir = resolve_out_dir(config)
    out_dir.mkdir(parents=True, exist_ok=True)
    params = resolve_system_params(config)
    payload = {
        "schema_version": METRICS_SCHEMA_VERSION,
        "config": config.model_dump(mode="json"),
        "params": params.model_dump(mode="json"),
    }
    (out_dir / CONFIG_FILE).write_text(json.dumps(payload, indent=2))
    log = logger.bind(run_id=config.run_id)
    log.info("run_started", algo=config.algo, devices=config.devices, frames=config.frames, out_dir=str(out_dir))

    trainer = build_trainer(config, params, checkpoint_dir=out_dir / CHECKPOINT_DIR)
    rows: List[FrameMetrics] = []
    started = time.perf_counter()
    try:
        for metrics in trainer.run(config.frames):
            rows.append(metrics)
    finally:
        elapsed = time.perf_counter() - started
        frame = metrics_frame(rows)
        frame.to_csv(out_dir / METRICS_FILE, index=False)
        summary = summarize(config, frame, elapsed if config.record_timing else None)
        (out_dir / SUMMARY_FILE).write_text(summary.model_dump_json(indent=2))
    log.info(
        "run_finished",
        average_normalized_rate=summary.average_normalized_rate,
        total_time_s=summary.total_time_s,
    )
    return out_dir


def load_summary(run_dir: Union[str, Path]) -> RunSummary:
    return RunSummary.model_validate_json((Path(run_dir) / SUMMARY_FILE).read_text())


def compare_runs(run_dirs: Sequence[Union[str, Path]], out: Optional[Union[str, Path]] = None) -> pd.DataFrame:
    """Merge run summaries into one table, best average normalized rate first."""
    summaries = []
    for run_dir in run_dirs:
        path = Path(run_dir) / SUMMARY_FILE
        if not path.is_file():
            logger.warning("summary_missing", run_dir=str(run_dir))
            continue
        summaries.append(load_summary(run_dir).model_dump())
    table = pd.DataFrame(summaries, columns=list(RunSummary.model_fields))
    table = table.sort_values(
        "average_normalized_rate", ascending=False, kind="stable", na_position="last"
    ).reset_index(drop=True)
    print(table.to_string(index=False))
    if out is not None:
        table.to_csv(out, index=False)
    return table


def run_matrix(
    devices: int,
    seed: int = 0,
    frames: Optional[int] = None,
    out_root: Optional[Union[str, Path]] = None,
    **overrides,
) -> pd.DataFrame:
    """Run the four classical configurations on one network and compare them."""
    root = Path(out_root) if out_root is not None else Path(settings.OUTPUT_ROOT)
    run_dirs = []
    for algo in TABLE_ALGORITHMS:
        config = ExperimentConfig(devices=devices, frames=frames, algo=algo, seed=seed, **overrides)
        config.out_dir = str(root / config.run_id)
        run_dirs.append(run_experiment(config))
    return compare_runs(run_dirs, out=root / f"comparison-n{devices}-s{seed}.csv")
