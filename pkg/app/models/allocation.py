# FILE: app/models/allocation.py
# ============================================================================
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Allocation:
    """Time split of one frame and the weighted sum rate it achieves."""

    a: float
    tau: np.ndarray
    value: float

    @property
    def used_time(self) -> float:
        return float(self.a + np.sum(self.tau))


@dataclass(frozen=True)
class SolveReport:
    """Outcome of one resource-allocation solve."""

    allocation: Allocation
    iterations: int
    converged: bool

    @property
    def value(self) -> float:
        return self.allocation.value
