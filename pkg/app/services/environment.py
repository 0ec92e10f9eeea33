# FILE: app/services/environment.py
# ============================================================================
"""Channel generation and the physical-layer rate and energy formulas."""
import math
from typing import Optional, Union

import numpy as np

from app.exceptions import InvalidArgumentError
from app.models.allocation import Allocation
from app.models.channel import ChannelRealization, Rates
from app.models.decision import as_decision
from app.schemas.params import LIGHT_SPEED, SystemParams

ArrayLike = Union[float, np.ndarray]

FEASIBILITY_SLACK = 1e-9


def _check_fraction(name: str, value: ArrayLike) -> None:
    arr = np.asarray(value, dtype=float)
    if np.any(arr < 0) or np.any(arr > 1) or np.any(~np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} must lie in [0, 1]")


def _check_positive(name: str, value: ArrayLike) -> None:
    arr = np.asarray(value, dtype=float)
    if np.any(arr <= 0) or np.any(~np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} must be positive")


def _capacitance(params: SystemParams, device: Optional[int]) -> ArrayLike:
    k = params.k_values
    return k if device is None else k[device]


def mean_channel_gain(distance: ArrayLike, params: SystemParams) -> ArrayLike:
    """Free-space mean gain A_d * (c / (4 pi f_c d))^d_e."""
    _check_positive("distance", distance)
    d = np.asarray(distance, dtype=float)
    gain = params.antenna_gain * (
        LIGHT_SPEED / (4.0 * math.pi * params.carrier_freq * d)
    ) ** params.pathloss_exp
    return float(gain) if gain.ndim == 0 else gain


def sample_channels(
    rng: np.random.Generator,
    params: SystemParams,
    frame_index: int = 0,
    fading: Optional[np.ndarray] = None,
) -> ChannelRealization:
    """Draw one Rayleigh-faded channel realization.

    Each gain is the distance mean gain times an exponential(1) factor.
    ``fading`` replaces the random factors and leaves ``rng`` untouched.
    """
    mean_gains = mean_channel_gain(params.distance_values, params)
    if fading is None:
        fading = rng.exponential(1.0, size=params.n_devices)
    else:
        fading = np.asarray(fading, dtype=float)
        if fading.shape != (params.n_devices,):
            raise InvalidArgumentError("fading must have one factor per device")
    return ChannelRealization(gains=mean_gains * fading, frame_index=frame_index)


class ChannelSimulator:
    """Frame-by-frame channel source owning its random stream."""

    def __init__(self, params: SystemParams, rng: np.random.Generator):
        self.params = params
        self.rng = rng
        self.frame_index = 0

    def next(self) -> ChannelRealization:
        channel = sample_channels(self.rng, self.params, frame_index=self.frame_index)
        self.frame_index += 1
        return channel


def harvested_energy(h: ArrayLike, a: float, params: SystemParams) -> ArrayLike:
    """Energy harvested during the transfer phase: mu * P * h * a * T."""
    _check_fraction("a", a)
    if np.any(np.asarray(h) < 0):
        raise InvalidArgumentError("channel gain must be nonnegative")
    energy = params.mu * params.power * np.asarray(h, dtype=float) * a * params.frame_T
    return float(energy) if np.ndim(energy) == 0 else energy


def local_rate(
    h: ArrayLike,
    a: ArrayLike,
    params: SystemParams,
    device: Optional[int] = None,
) -> ArrayLike:
    """Maximum local computation rate eta1 * (h / k)^(1/3) * a^(1/3).

    ``device`` selects one capacitance coefficient; without it ``h`` is the
    full per-device gain vector.
    """
    _check_positive("channel gain", h)
    _check_fraction("a", a)
    k = _capacitance(params, device)
    return params.eta1 * np.cbrt(np.asarray(h, dtype=float) / k) * np.cbrt(a)


def offload_rate(h: ArrayLike, a: ArrayLike, tau: ArrayLike, params: SystemParams) -> ArrayLike:
    """Uplink rate (B * tau / v_u) * log2(1 + mu P h^2 a / (tau N0)), zero at tau = 0."""
    _check_positive("channel gain", h)
    _check_fraction("a", a)
    _check_fraction("tau", tau)
    h = np.asarray(h, dtype=float)
    tau = np.asarray(tau, dtype=float)
    snr_numerator = params.mu * params.power * h ** 2 * np.asarray(a, dtype=float) / params.noise
    safe_tau = np.where(tau > 0, tau, 1.0)
    rate = np.where(
        tau > 0,
        params.bandwidth * tau / params.vu * np.log2(1.0 + snr_numerator / safe_tau),
        0.0,
    )
    return float(rate) if rate.ndim == 0 else rate


def device_rates(h: float, a: float, tau: float, params: SystemParams, device: int) -> Rates:
    """Both computation modes of one device for a given time split."""
    return Rates(
        local_rate=float(local_rate(h, a, params, device=device)),
        offload_rate=float(offload_rate(h, a, tau, params)),
    )


def check_feasible(alloc: Allocation, n_devices: int) -> None:
    tau = np.asarray(alloc.tau, dtype=float)
    if tau.shape != (n_devices,):
        raise InvalidArgumentError(f"tau must have {n_devices} entries")
    if alloc.a < 0 or np.any(tau < 0):
        raise InvalidArgumentError("allocation fractions must be nonnegative")
    if alloc.a + tau.sum() > 1.0 + FEASIBILITY_SLACK:
        raise InvalidArgumentError("allocation exceeds the frame time budget")


def weighted_sum_rate(
    channel: ChannelRealization,
    x: np.ndarray,
    alloc: Allocation,
    params: SystemParams,
) -> float:
    """Objective of the mixed-integer problem for a feasible allocation."""
    x = as_decision(x, params.n_devices)
    check_feasible(alloc, params.n_devices)
    a = min(max(alloc.a, 0.0), 1.0)
    h = channel.gains
    tau = np.clip(np.asarray(alloc.tau, dtype=float), 0.0, 1.0)
    local = local_rate(h, a, params)
    offload = offload_rate(h, a, tau, params)
    return float(np.sum(params.weight_values * np.where(x == 1, offload, local)))
