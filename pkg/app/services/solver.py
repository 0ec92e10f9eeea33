# FILE: app/services/solver.py
# ============================================================================
"""Exact time allocation for fixed offloading decisions, plus references.

For a fixed decision the problem is convex. Writing ``u_i = c_i / tau_i``
with ``c_i = mu P h_i^2 a / N0``, the stationarity condition of every
offloading device is

    ln(1 + u) - u / (1 + u) = kappa_i,   kappa_i = nu * ln2 * v_u / (w_i * B)

so all devices sharing a weight share ``u``; its solution has the closed form
``u = 1 / s - 1`` with ``s = -W0(-exp(-1 - kappa))``. With a tight time
budget the transfer fraction follows from the multiplier as
``a = 1 / (1 + sum_i g_i / u_i)`` where ``g_i = mu P h_i^2 / N0``.
"""
import math
from typing import NamedTuple, Optional

import numpy as np
from scipy.special import lambertw

from app.core.config import settings
from app.core.logging import get_logger
from app.exceptions import EnumerationLimitError, InvalidArgumentError, InvalidStateError
from app.models.allocation import Allocation, SolveReport
from app.models.channel import ChannelRealization
from app.models.decision import as_decision, as_decision_matrix
from app.schemas.params import SystemParams

logger = get_logger(__name__)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
MAX_ITERATIONS = 200
# Search range of log(kappa) for a unit-weight device.
LOG_KAPPA_LO = math.log(1e-14)
LOG_KAPPA_HI = math.log(1e2)
KAPPA_CEILING = 600.0
SERIES_THRESHOLD = 1e-6
# Below this level the stationarity gap is summed as a power series.
SMALL_LEVEL = 1e-3
# Relative slack when checking that time used falls with the multiplier.
MONOTONE_SLACK = 1e-12
CHUNK_ROWS = 4096


class BestDecision(NamedTuple):
    decision: np.ndarray
    value: float


class BatchSolution(NamedTuple):
    a: np.ndarray
    tau: np.ndarray
    values: np.ndarray
    iterations: int
    converged: np.ndarray


class _Coefficients(NamedTuple):
    g: np.ndarray
    weighted_bandwidth: np.ndarray
    local_coeff: np.ndarray
    weights: np.ndarray


def _check_tol(tol: float) -> None:
    if not (0 < tol <= 1e-2):
        raise InvalidArgumentError("tol must lie in (0, 1e-2]")


def _coefficients(channel: ChannelRealization, params: SystemParams) -> _Coefficients:
    h = channel.gains
    if h.shape != (params.n_devices,):
        raise InvalidArgumentError("channel size does not match n_devices")
    if np.any(h <= 0):
        raise InvalidArgumentError("channel gains must be positive")
    w = params.weight_values
    return _Coefficients(
        g=params.mu * params.power * h ** 2 / params.noise,
        weighted_bandwidth=w * params.bandwidth / params.vu,
        local_coeff=w * params.eta1 * np.cbrt(h / params.k_values),
        weights=w,
    )


def stationarity_gap(u: np.ndarray) -> np.ndarray:
    """ln(1 + u) - u / (1 + u), free of cancellation for small u."""
    u = np.asarray(u, dtype=float)
    series = u ** 2 * (0.5 - u * (2.0 / 3.0 - u * (0.75 - u * (0.8 - u * 5.0 / 6.0))))
    with np.errstate(invalid="ignore"):
        direct = np.log1p(u) - u / (1.0 + u)
    return np.where(u < SMALL_LEVEL, series, direct)


def rate_level(kappa: np.ndarray) -> np.ndarray:
    """Solve ln(1 + u) - u / (1 + u) = kappa for u > 0, elementwise."""
    kappa = np.minimum(np.asarray(kappa, dtype=float), KAPPA_CEILING)
    s = -lambertw(-np.exp(-1.0 - kappa), 0).real
    with np.errstate(divide="ignore"):
        u = 1.0 / s - 1.0
    root = np.sqrt(2.0 * kappa)
    u = np.where((kappa < SERIES_THRESHOLD) | ~(u > 0), root + 2.0 * root ** 2 / 3.0, u)
    for _ in range(2):
        residual = stationarity_gap(u) - kappa
        u = u - residual * (1.0 + u) * (1.0 + 1.0 / u)
    return u


def _levels(log_kappa: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Per-device u for each row's multiplier; computed once per distinct weight."""
    unique_w, inverse = np.unique(weights, return_inverse=True)
    kappa = np.exp(log_kappa)[:, None] / unique_w[None, :]
    return rate_level(kappa)[:, inverse]


def _dual_evaluate(log_kappa, offload, coeffs: _Coefficients, local_total):
    u = _levels(log_kappa, coeffs.weights)
    ratio = np.where(offload, coeffs.g / u, 0.0)
    a = 1.0 / (1.0 + ratio.sum(axis=1))
    per_unit = np.where(offload, coeffs.weighted_bandwidth * ratio * np.log2(1.0 + u), 0.0)
    values = local_total * np.cbrt(a) + a * per_unit.sum(axis=1)
    return values, a, ratio


def _allocation_value(a, tau, offload, coeffs: _Coefficients):
    """Objective of rows of allocations, evaluated from the rate formulas."""
    safe_tau = np.where(tau > 0, tau, 1.0)
    off = np.where(
        offload & (tau > 0),
        coeffs.weighted_bandwidth * tau * np.log2(1.0 + coeffs.g * a[:, None] / safe_tau),
        0.0,
    )
    local = np.where(offload, 0.0, coeffs.local_coeff[None, :] * np.cbrt(a)[:, None])
    return (off + local).sum(axis=1)


def _solve_dual_rows(offload: np.ndarray, coeffs: _Coefficients, tol: float):
    """Golden-section over log(kappa) for rows that offload at least one task."""
    rows = offload.shape[0]
    local_total = np.where(offload, 0.0, coeffs.local_coeff).sum(axis=1)
    lo = np.full(rows, LOG_KAPPA_LO)
    hi = np.full(rows, LOG_KAPPA_HI)
    c = hi - GOLDEN * (hi - lo)
    d = lo + GOLDEN * (hi - lo)
    fc, _, _ = _dual_evaluate(c, offload, coeffs, local_total)
    fd, _, _ = _dual_evaluate(d, offload, coeffs, local_total)
    width = LOG_KAPPA_HI - LOG_KAPPA_LO
    iterations = 0
    while width > tol and iterations < MAX_ITERATIONS:
        left = fc >= fd
        hi = np.where(left, d, hi)
        lo = np.where(left, lo, c)
        span = hi - lo
        trial = np.where(left, hi - GOLDEN * span, lo + GOLDEN * span)
        f_trial, _, _ = _dual_evaluate(trial, offload, coeffs, local_total)
        c, fc, d, fd = (
            np.where(left, trial, d),
            np.where(left, f_trial, fd),
            np.where(left, c, trial),
            np.where(left, fc, f_trial),
        )
        width *= GOLDEN
        iterations += 1
    best = np.where(fc >= fd, c, d)
    _, a, ratio = _dual_evaluate(best, offload, coeffs, local_total)
    tau = a[:, None] * ratio
    values = _allocation_value(a, tau, offload, coeffs)
    return a, tau, values, iterations, width <= tol


def solve_p2_batch(
    channel: ChannelRealization,
    decisions: np.ndarray,
    params: SystemParams,
    tol: Optional[float] = None,
) -> BatchSolution:
    """Allocate time for every decision row of ``decisions`` in lockstep."""
    tol = settings.SOLVER_TOL if tol is None else tol
    _check_tol(tol)
    X = as_decision_matrix(decisions, params.n_devices)
    coeffs = _coefficients(channel, params)
    rows = X.shape[0]
    a = np.ones(rows)
    tau = np.zeros((rows, params.n_devices))
    values = np.full(rows, float(coeffs.local_coeff.sum()))
    converged = np.ones(rows, dtype=bool)
    iterations = 0

    active = np.flatnonzero(X.any(axis=1))
    for start in range(0, len(active), CHUNK_ROWS):
        idx = active[start:start + CHUNK_ROWS]
        ra, rtau, rval, iters, done = _solve_dual_rows(X[idx] == 1, coeffs, tol)
        a[idx], tau[idx], values[idx] = ra, rtau, rval
        used = ra + rtau.sum(axis=1)
        converged[idx] = done & np.isfinite(rval) & (used <= 1.0 + 1e-9)
        iterations = max(iterations, iters)
    if not converged.all():
        logger.warning("allocation_not_converged", rows=int((~converged).sum()), iterations=iterations)
    return BatchSolution(a=a, tau=tau, values=values, iterations=iterations, converged=converged)


def partial_maximum(
    channel: ChannelRealization,
    x: np.ndarray,
    params: SystemParams,
    a: float,
) -> tuple[float, np.ndarray, int]:
    """Best objective for a fixed transfer fraction ``a``, by dual bisection.

    Returns ``(value, tau, bisection_steps)``. The remaining budget ``1 - a``
    is split among offloading devices so that they share one multiplier.
    """
    if not (0.0 <= a <= 1.0):
        raise InvalidArgumentError("a must lie in [0, 1]")
    x = as_decision(x, params.n_devices)
    coeffs = _coefficients(channel, params)
    offload = x == 1
    local_value = float(np.sum(coeffs.local_coeff[~offload]) * np.cbrt(a))
    tau = np.zeros(params.n_devices)
    if not offload.any() or a == 0.0 or a == 1.0:
        return local_value, tau, 0

    budget = 1.0 - a
    weights = coeffs.weights[offload]
    g = coeffs.g[offload]

    def time_used(log_kappa: float) -> float:
        u = _levels(np.array([log_kappa]), weights)[0]
        return float(a * np.sum(g / u))

    lo, hi = LOG_KAPPA_LO, LOG_KAPPA_HI
    while time_used(lo) < budget:
        lo -= 5.0
    while time_used(hi) > budget:
        hi += 5.0
    used_lo, used_hi = time_used(lo), time_used(hi)
    steps = 0
    while hi - lo > 1e-10 and steps < MAX_ITERATIONS:
        mid = 0.5 * (lo + hi)
        used_mid = time_used(mid)
        if not (used_lo * (1.0 + MONOTONE_SLACK) >= used_mid >= used_hi * (1.0 - MONOTONE_SLACK)):
            raise InvalidStateError("time used is not monotone in the multiplier")
        if used_mid > budget:
            lo, used_lo = mid, used_mid
        else:
            hi, used_hi = mid, used_mid
        steps += 1

    u = _levels(np.array([0.5 * (lo + hi)]), weights)[0]
    share = a * g / u
    tau[offload] = share * (budget / share.sum())
    value = float(_allocation_value(np.array([a]), tau[None, :], offload[None, :], coeffs)[0])
    return value, tau, steps


def _solve_nested(channel, x, params, tol) -> SolveReport:
    """Golden-section over a with the dual bisection inside."""
    lo, hi = 0.0, 1.0
    c = hi - GOLDEN * (hi - lo)
    d = lo + GOLDEN * (hi - lo)
    fc = partial_maximum(channel, x, params, c)[0]
    fd = partial_maximum(channel, x, params, d)[0]
    iterations = 0
    while hi - lo > tol and iterations < MAX_ITERATIONS:
        if fc >= fd:
            hi, d, fd = d, c, fc
            c = hi - GOLDEN * (hi - lo)
            fc = partial_maximum(channel, x, params, c)[0]
        else:
            lo, c, fc = c, d, fd
            d = lo + GOLDEN * (hi - lo)
            fd = partial_maximum(channel, x, params, d)[0]
        iterations += 1
    a_best = c if fc >= fd else d
    value, tau, _ = partial_maximum(channel, x, params, a_best)
    allocation = Allocation(a=a_best, tau=tau, value=value)
    converged = hi - lo <= tol and allocation.used_time <= 1.0 + 1e-9
    return SolveReport(allocation=allocation, iterations=iterations, converged=converged)


def solve_p2(
    channel: ChannelRealization,
    x: np.ndarray,
    params: SystemParams,
    tol: Optional[float] = None,
    method: str = "dual",
) -> SolveReport:
    """Optimal time allocation and weighted sum rate for one decision.

    ``method="dual"`` runs the golden-section over the shared multiplier;
    ``method="nested"`` runs it over ``a`` with a dual bisection per trial point.
    """
    tol = settings.SOLVER_TOL if tol is None else tol
    _check_tol(tol)
    x = as_decision(x, params.n_devices)
    if method == "nested":
        if not x.any():
            coeffs = _coefficients(channel, params)
            allocation = Allocation(a=1.0, tau=np.zeros(params.n_devices), value=float(coeffs.local_coeff.sum()))
            return SolveReport(allocation=allocation, iterations=0, converged=True)
        try:
            return _solve_nested(channel, x, params, tol)
        except InvalidStateError as exc:
            logger.warning("allocation_not_converged", method=method, error=str(exc))
            value = partial_maximum(channel, x, params, 1.0)[0]
            allocation = Allocation(a=1.0, tau=np.zeros(params.n_devices), value=value)
            return SolveReport(allocation=allocation, iterations=0, converged=False)
    if method != "dual":
        raise InvalidArgumentError(f"unknown solver method: {method}")
    solution = solve_p2_batch(channel, x[None, :], params, tol)
    allocation = Allocation(
        a=float(solution.a[0]),
        tau=solution.tau[0],
        value=float(solution.values[0]),
    )
    return SolveReport(
        allocation=allocation,
        iterations=solution.iterations,
        converged=bool(solution.converged[0]),
    )


def enumerate_decisions(n_devices: int) -> np.ndarray:
    """All 2^N decisions, row r holding the bits of r (device 0 least significant)."""
    codes = np.arange(1 << n_devices, dtype=np.int64)[:, None]
    return ((codes >> np.arange(n_devices, dtype=np.int64)[None, :]) & 1).astype(np.int8)


def exhaustive_best(
    channel: ChannelRealization,
    params: SystemParams,
    tol: Optional[float] = None,
    cap: Optional[int] = None,
) -> BestDecision:
    """Best decision over all 2^N; ties go to the smallest binary value."""
    cap = settings.ENUMERATION_CAP if cap is None else cap
    if params.n_devices > cap:
        raise EnumerationLimitError(params.n_devices, cap)
    decisions = enumerate_decisions(params.n_devices)
    solution = solve_p2_batch(channel, decisions, params, tol)
    values = np.where(solution.converged, solution.values, -np.inf)
    best = int(np.argmax(values))
    return BestDecision(decision=decisions[best], value=float(values[best]))


def local_search_best(
    channel: ChannelRealization,
    params: SystemParams,
    starts: int,
    rng: np.random.Generator,
    tol: Optional[float] = None,
) -> BestDecision:
    """Steepest single-bit-flip ascent from several starting decisions.

    Starts are the all-local decision, the all-offload decision, then random
    ones; all starts climb in lockstep. The best local optimum wins, earlier
    starts winning ties.
    """
    if starts < 1:
        raise InvalidArgumentError("starts must be at least 1")
    n = params.n_devices
    seeds = [np.zeros(n, dtype=np.int8), np.ones(n, dtype=np.int8)][:starts]
    while len(seeds) < starts:
        seeds.append(rng.integers(0, 2, size=n).astype(np.int8))
    current = np.stack(seeds)
    current_values = solve_p2_batch(channel, current, params, tol).values
    active = np.ones(starts, dtype=bool)
    flips = np.eye(n, dtype=np.int8)

    while active.any():
        rows = np.flatnonzero(active)
        neighbours = (current[rows][:, None, :] ^ flips[None, :, :]).reshape(-1, n)
        solution = solve_p2_batch(channel, neighbours, params, tol)
        values = np.where(solution.converged, solution.values, -np.inf).reshape(len(rows), n)
        best_flip = np.argmax(values, axis=1)
        best_values = values[np.arange(len(rows)), best_flip]
        improved = best_values > current_values[rows]
        for row, flip, value, better in zip(rows, best_flip, best_values, improved):
            if better:
                current[row, flip] ^= 1
                current_values[row] = value
            else:
                active[row] = False

    best = int(np.argmax(current_values))
    return BestDecision(decision=current[best].copy(), value=float(current_values[best]))


def normalized_rate(value: float, ref_value: float) -> float:
    """Achieved objective over a reference maximizer's objective."""
    if not ref_value > 0:
        raise InvalidArgumentError("reference value must be positive")
    return value / ref_value
