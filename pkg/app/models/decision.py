# FILE: app/models/decision.py
# ============================================================================
from dataclasses import dataclass, field
from typing import Literal, Sequence, Union

import numpy as np

from app.exceptions import InvalidArgumentError

# A binary offloading vector x: 1 offloads to the AP, 0 computes locally.
OffloadDecision = np.ndarray

QuantizerName = Literal["op", "ugq"]


def as_decision(x: Union[Sequence[int], np.ndarray], n_devices: int) -> OffloadDecision:
    """Validate and normalize a decision vector to an int8 array."""
    arr = np.asarray(x)
    if arr.shape != (n_devices,):
        raise InvalidArgumentError(
            f"decision must have shape ({n_devices},), got {arr.shape}"
        )
    if not np.all((arr == 0) | (arr == 1)):
        raise InvalidArgumentError("decision entries must be 0 or 1")
    return arr.astype(np.int8)


def as_decision_matrix(xs: Union[Sequence[Sequence[int]], np.ndarray], n_devices: int) -> np.ndarray:
    """Validate a stack of decisions, one per row."""
    arr = np.asarray(xs)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != n_devices:
        raise InvalidArgumentError(
            f"decision matrix must have shape (M, {n_devices}), got {arr.shape}"
        )
    if not np.all((arr == 0) | (arr == 1)):
        raise InvalidArgumentError("decision entries must be 0 or 1")
    return arr.astype(np.int8)


def decision_key(x: np.ndarray) -> int:
    """Binary value of a decision with device 0 as the least significant bit."""
    return int(np.dot(np.asarray(x, dtype=np.int64), 1 << np.arange(len(x), dtype=np.int64)))


@dataclass
class CandidateSet:
    """Ordered binary candidates produced from one relaxed decision vector."""

    actions: np.ndarray
    generator: QuantizerName
    noise_sigma: float = 0.0
    flips: list = field(default_factory=list)

    def __len__(self) -> int:
        return int(self.actions.shape[0])

    def __iter__(self):
        return iter(self.actions)
