# FILE: app/models/channel.py
# ============================================================================
from dataclasses import dataclass

import numpy as np

from app.exceptions import InvalidArgumentError


@dataclass(frozen=True)
class ChannelRealization:
    """Channel power gains of every device for one frame (the MDP state)."""

    gains: np.ndarray
    frame_index: int = 0

    def __post_init__(self):
        gains = np.array(self.gains, dtype=float)
        if gains.ndim != 1 or gains.size == 0:
            raise InvalidArgumentError("gains must be a non-empty vector")
        if not np.all(np.isfinite(gains) & (gains > 0)):
            raise InvalidArgumentError("channel gains must be positive and finite")
        gains.setflags(write=False)
        object.__setattr__(self, "gains", gains)

    @property
    def n_devices(self) -> int:
        return int(self.gains.shape[0])


@dataclass(frozen=True)
class Rates:
    """Local and offloading computation rates of one device (bits/s)."""

    local_rate: float
    offload_rate: float
