# FILE: app/qsim/layer.py
# ============================================================================
import numpy as np

from app.nn.layers import Module
from app.qsim.circuit import Axis, CircuitConfig, encode_forward, gradients


class QuantumLayer(Module):
    """Circuit as a layer: (B, n_qubits) features in, Pauli-Z expectations out."""

    def __init__(self, n_qubits: int, rng: np.random.Generator, variational_axis: Axis = "Y"):
        super().__init__()
        self.n_qubits = n_qubits
        self.variational_axis = variational_axis
        self.params["theta"] = rng.uniform(-np.pi, np.pi, size=n_qubits)
        self.zero_grad()
        self._x = None

    def config(self) -> CircuitConfig:
        return CircuitConfig(
            n_qubits=self.n_qubits,
            theta=self.params["theta"],
            variational_axis=self.variational_axis,
        )

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        _, q = encode_forward(x, self.config())
        return q

    def backward(self, dq: np.ndarray) -> np.ndarray:
        dq_dtheta, dq_dx = gradients(self._x, self.config())
        self.grads["theta"] = np.einsum("...i,...ij->j", dq, dq_dtheta)
        return np.einsum("...i,...ij->...j", dq, dq_dx)
