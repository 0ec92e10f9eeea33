# FILE: app/services/quantize.py
# ============================================================================
"""Relaxed decision vector -> K binary candidate decisions."""
from typing import Optional

import numpy as np

from app.exceptions import InvalidArgumentError
from app.models.decision import CandidateSet

# Pivot thresholds are pulled toward 0.5 by this factor before noise is added.
PIVOT_SHRINK = 0.7


def _as_relaxed(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 1 or m.size == 0:
        raise InvalidArgumentError("relaxed decision must be a non-empty vector")
    return m


def threshold_action(m: np.ndarray) -> np.ndarray:
    """Entries strictly above 0.5 offload."""
    return (np.asarray(m) > 0.5).astype(np.int8)


def op_quantize(m: np.ndarray, k: int) -> CandidateSet:
    """Order-preserving quantization.

    Candidate 1 thresholds at 0.5. Candidate j >= 2 thresholds at the value of
    the (j-1)-th entry nearest 0.5; that pivot entry itself becomes 1 when
    its value is at most 0.5 and 0 otherwise.
    """
    m = _as_relaxed(m)
    n = m.size
    if not (1 <= k <= n + 1):
        raise InvalidArgumentError(f"K must lie in [1, {n + 1}], got {k}")
    actions = [threshold_action(m)]
    order = np.argsort(np.abs(m - 0.5), kind="stable")
    for pivot in order[:k - 1]:
        x = (m > m[pivot]).astype(np.int8)
        x[pivot] = 1 if m[pivot] <= 0.5 else 0
        actions.append(x)
    return CandidateSet(actions=np.stack(actions), generator="op", noise_sigma=0.0)


def ugq_quantize(
    m: np.ndarray,
    k: int,
    sigma: float,
    rng: Optional[np.random.Generator] = None,
) -> CandidateSet:
    """Uncertainty-guided quantization.

    Pivots are taken from the entries nearest 0.5 (stable order). Each pivot
    value, shrunk toward 0.5 and perturbed by U(-sigma, sigma), becomes a
    threshold; a candidate that repeats an earlier one gets exactly one bit
    flipped at the next pivot position and is kept either way.
    """
    m = _as_relaxed(m)
    if k < 1:
        raise InvalidArgumentError("K must be at least 1")
    if sigma < 0:
        raise InvalidArgumentError("sigma must be nonnegative")
    rng = rng if rng is not None else np.random.default_rng()
    n = m.size
    actions = [threshold_action(m)]
    candidates = CandidateSet(actions=actions[0][None, :], generator="ugq", noise_sigma=sigma)
    if k == 1:
        return candidates

    order = np.argsort(np.abs(m - 0.5), kind="stable")
    for i in range(1, k):
        p = m[order[i % n]]
        threshold = 0.5 + (p - 0.5) * PIVOT_SHRINK + rng.uniform(-sigma, sigma)
        x = (m > threshold).astype(np.int8)
        if any(np.array_equal(x, member) for member in actions):
            flip = int(order[(i + 1) % n])
            x[flip] = 1 - x[flip]
            candidates.flips.append((i, flip))
        actions.append(x)

    candidates.actions = np.stack(actions)
    return candidates


def quantize(
    m: np.ndarray,
    k: int,
    generator: str,
    sigma: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> CandidateSet:
    """Dispatch to the named quantizer."""
    if generator == "op":
        return op_quantize(m, k)
    if generator == "ugq":
        return ugq_quantize(m, k, sigma, rng)
    raise InvalidArgumentError(f"unknown quantizer: {generator}")
