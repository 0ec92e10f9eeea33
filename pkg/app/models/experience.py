# FILE: app/models/experience.py
# ============================================================================
from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class Experience:
    """A stored (state, best action) pair.

    ``state`` is the scaled channel vector for feed-forward policies and the
    trailing window of scaled channel vectors (oldest first) for the recurrent
    one.
    """

    state: np.ndarray
    best_action: np.ndarray
    best_value: float
    frame_index: int


@dataclass(frozen=True)
class FrameMetrics:
    """Per-frame row of metrics.csv."""

    frame_index: int
    chosen_value: float
    reference_value: float
    normalized_rate: float
    training_loss: Optional[float]
    decision_time_seconds: Optional[float]

    def as_dict(self) -> dict:
        return asdict(self)
