# FILE: app/policies/quantum.py
# ============================================================================
"""Hybrid policies: classical reduction to 8 features, the variational circuit,
a mixing block on the Pauli-Z features, then a classical sigmoid head."""
from abc import abstractmethod

import numpy as np

from app.nn.layers import Linear, Module, MultiHeadAttention, ReLU, Sigmoid
from app.policies.base import PolicyModel
from app.qsim.circuit import Axis
from app.qsim.layer import QuantumLayer

N_QUBITS = 8
REDUCE_HIDDEN = 64
HEAD_HIDDEN = 64
HEADS = 4


class _QuantumPolicy(PolicyModel):
    def __init__(self, n_devices: int, rng: np.random.Generator, variational_axis: Axis = "Y"):
        super().__init__(n_devices)
        self.layers = [
            ("reduce1", Linear(n_devices, REDUCE_HIDDEN, rng)),
            ("reduce_relu1", ReLU()),
            ("reduce2", Linear(REDUCE_HIDDEN, N_QUBITS, rng)),
            ("reduce_relu2", ReLU()),
            ("circuit", QuantumLayer(N_QUBITS, rng, variational_axis)),
            ("mix", self._mixing_block(rng)),
            ("head1", Linear(N_QUBITS, HEAD_HIDDEN, rng)),
            ("head_relu", ReLU()),
            ("head2", Linear(HEAD_HIDDEN, n_devices, rng)),
            ("sigmoid", Sigmoid()),
        ]

    @abstractmethod
    def _mixing_block(self, rng: np.random.Generator) -> Module:
        """Block applied to the Pauli-Z features."""

    def modules(self):
        return self.layers

    def forward(self, inputs: np.ndarray) -> np.ndarray:
        out = inputs
        for name, layer in self.layers:
            if name == "mix" and isinstance(layer, MultiHeadAttention):
                # quantum features attend as a length-1 sequence
                out = layer.forward(out[:, None, :])[:, 0, :]
            else:
                out = layer.forward(out)
        return out

    def backward(self, dm: np.ndarray) -> None:
        grad = dm
        for name, layer in reversed(self.layers):
            if name == "mix" and isinstance(layer, MultiHeadAttention):
                grad = layer.backward(grad[:, None, :])[:, 0, :]
            else:
                grad = layer.backward(grad)


class QuantumAttentionPolicy(_QuantumPolicy):
    variant = "qattn"

    def _mixing_block(self, rng):
        return MultiHeadAttention(N_QUBITS, HEADS, rng)


class QuantumDNNPolicy(_QuantumPolicy):
    """Same hybrid with a plain 8 -> 8 linear layer in place of attention."""

    variant = "qdnn"

    def _mixing_block(self, rng):
        return Linear(N_QUBITS, N_QUBITS, rng)
