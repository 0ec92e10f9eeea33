# FILE: app/repositories/run.py
# ============================================================================
import json
from pathlib import Path
from typing import Optional

import pandas as pd

from app.repositories.base import BaseRepository
from app.schemas.experiment import RunSummary
from app.services.experiment import CONFIG_FILE, METRICS_FILE, SUMMARY_FILE


class RunRepository(BaseRepository[RunSummary]):
    """Run directories under the output root, keyed by directory name."""

    def __init__(self, root: Path):
        super().__init__(RunSummary, root, SUMMARY_FILE)

    def get_config(self, run_id: str) -> Optional[dict]:
        path = self.record_dir(run_id) / CONFIG_FILE
        if not path.is_file():
            return None
        return json.loads(path.read_text())

    def get_metrics(self, run_id: str) -> Optional[pd.DataFrame]:
        path = self.record_dir(run_id) / METRICS_FILE
        if not path.is_file():
            return None
        return pd.read_csv(path)
