# FILE: app/qsim/circuit.py
# ============================================================================
"""Exact statevector simulation of the encode / entangle / variational circuit.

States are complex arrays of shape (..., 2**n_qubits); leading axes are
independent circuits evaluated together. Qubit q is bit q of the amplitude
index (little-endian), so qubit 0 is the least significant bit.
"""
import math
from dataclasses import dataclass, field
from typing import Literal, Tuple

import numpy as np

from app.exceptions import InvalidArgumentError

Axis = Literal["X", "Y", "Z"]

ENCODING_SCALES = (math.pi, math.pi / 2.0)
SHIFT = math.pi / 2.0


def n_qubits_of(state: np.ndarray) -> int:
    n = int(state.shape[-1]).bit_length() - 1
    if n < 1 or state.shape[-1] != 1 << n:
        raise InvalidArgumentError("state length must be a power of two")
    return n


def zero_state(n_qubits: int, batch_shape: Tuple[int, ...] = ()) -> np.ndarray:
    if n_qubits < 1:
        raise InvalidArgumentError("a circuit needs at least one qubit")
    state = np.zeros(batch_shape + (1 << n_qubits,), dtype=complex)
    state[..., 0] = 1.0
    return state


def rotation_matrix(axis: Axis, angle) -> np.ndarray:
    """exp(-i angle sigma_axis / 2) with shape angle.shape + (2, 2)."""
    angle = np.asarray(angle, dtype=float)
    c = np.cos(angle / 2.0)
    s = np.sin(angle / 2.0)
    zero = np.zeros_like(c)
    if axis == "X":
        rows = [[c, -1j * s], [-1j * s, c]]
    elif axis == "Y":
        rows = [[c, -s], [s, c]]
    elif axis == "Z":
        rows = [[np.exp(-0.5j * angle), zero], [zero, np.exp(0.5j * angle)]]
    else:
        raise InvalidArgumentError(f"unknown rotation axis: {axis}")
    return np.stack([np.stack(row, axis=-1) for row in rows], axis=-2).astype(complex)


def apply_rotation(state: np.ndarray, qubit: int, axis: Axis, angle) -> np.ndarray:
    """Apply a single-qubit rotation; ``angle`` broadcasts over the batch axes."""
    n = n_qubits_of(state)
    if not (0 <= qubit < n):
        raise InvalidArgumentError(f"qubit {qubit} out of range for {n} qubits")
    lead = state.shape[:-1]
    u = np.broadcast_to(rotation_matrix(axis, angle), lead + (2, 2))
    psi = state.reshape(lead + (1 << (n - 1 - qubit), 2, 1 << qubit))
    u = u[..., None, :, :, None]
    low, high = psi[..., 0, :], psi[..., 1, :]
    out = np.stack(
        [u[..., 0, 0, :] * low + u[..., 0, 1, :] * high,
         u[..., 1, 0, :] * low + u[..., 1, 1, :] * high],
        axis=-2,
    )
    return out.reshape(state.shape)


def cnot_permutation(n_qubits: int, control: int, target: int) -> np.ndarray:
    index = np.arange(1 << n_qubits)
    return index ^ (((index >> control) & 1) << target)


def apply_cnot_chain(state: np.ndarray) -> np.ndarray:
    """CNOT(i, i + 1) for i = 0 .. n - 2 in order; a single qubit is left as is."""
    n = n_qubits_of(state)
    for control in range(n - 1):
        state = state[..., cnot_permutation(n, control, control + 1)]
    return state


def expectation_z(state: np.ndarray) -> np.ndarray:
    """<Z_i> for every qubit, shape (..., n_qubits)."""
    n = n_qubits_of(state)
    index = np.arange(1 << n)
    signs = 1.0 - 2.0 * ((index[None, :] >> np.arange(n)[:, None]) & 1)
    probs = np.abs(state) ** 2
    return probs @ signs.T


@dataclass
class CircuitConfig:
    """Gate template: two encoding rotations per qubit, a CNOT chain, one variational rotation per qubit."""

    n_qubits: int
    theta: np.ndarray = None
    encoding_axes: Tuple[Axis, Axis] = ("X", "Y")
    variational_axis: Axis = "Y"
    scales: Tuple[float, float] = field(default=ENCODING_SCALES, init=False)

    def __post_init__(self):
        if self.n_qubits < 1:
            raise InvalidArgumentError("a circuit needs at least one qubit")
        self.theta = np.zeros(self.n_qubits) if self.theta is None else np.asarray(self.theta, dtype=float)
        if self.theta.shape != (self.n_qubits,):
            raise InvalidArgumentError(f"theta must have {self.n_qubits} angles")
        for axis in (*self.encoding_axes, self.variational_axis):
            if axis not in ("X", "Y", "Z"):
                raise InvalidArgumentError(f"unknown rotation axis: {axis}")


def _check_input(x_reduced, config: CircuitConfig) -> np.ndarray:
    x = np.asarray(x_reduced, dtype=float)
    if x.ndim == 0 or x.shape[-1] != config.n_qubits:
        raise InvalidArgumentError(f"input must have {config.n_qubits} features per circuit")
    return x


def _run(angles: np.ndarray, config: CircuitConfig) -> Tuple[np.ndarray, np.ndarray]:
    """angles (..., 3, n): encoding-1, encoding-2 and variational angle per qubit."""
    n = config.n_qubits
    state = zero_state(n, angles.shape[:-2])
    for q in range(n):
        state = apply_rotation(state, q, config.encoding_axes[0], angles[..., 0, q])
        state = apply_rotation(state, q, config.encoding_axes[1], angles[..., 1, q])
    state = apply_cnot_chain(state)
    for q in range(n):
        state = apply_rotation(state, q, config.variational_axis, angles[..., 2, q])
    return state, expectation_z(state)


def _gate_angles(x: np.ndarray, config: CircuitConfig) -> np.ndarray:
    theta = np.broadcast_to(config.theta, x.shape)
    return np.stack([config.scales[0] * x, config.scales[1] * x, theta], axis=-2)


def encode_forward(x_reduced, config: CircuitConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Returns (state, q) with q_i = <Z_i>; ``x_reduced`` may carry batch axes."""
    x = _check_input(x_reduced, config)
    return _run(_gate_angles(x, config), config)


def gradients(x_reduced, config: CircuitConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Parameter-shift derivatives (dq/dtheta, dq/dx), each (..., n, n) with [i, j] = dq_i / d_j.

    Every rotation is shifted by +-pi/2 in one batched simulation; the two
    encoding gates fed by x_j contribute with their scale factors.
    """
    x = _check_input(x_reduced, config)
    n = config.n_qubits
    base = _gate_angles(x, config)
    lead = base.shape[:-2]
    shifts = (SHIFT * np.eye(3 * n)).reshape((3 * n,) + (1,) * len(lead) + (3, n))
    shifted = np.stack([base[None] + shifts, base[None] - shifts])
    _, q = _run(shifted, config)
    per_gate = 0.5 * (q[0] - q[1])
    per_gate = np.moveaxis(per_gate.reshape((3, n) + lead + (n,)), (0, 1), (-2, -1))
    dq_dtheta = per_gate[..., 2, :]
    dq_dx = config.scales[0] * per_gate[..., 0, :] + config.scales[1] * per_gate[..., 1, :]
    return dq_dtheta, dq_dx
