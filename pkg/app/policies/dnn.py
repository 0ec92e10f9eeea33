# FILE: app/policies/dnn.py
# ============================================================================
import numpy as np

from app.nn.layers import Linear, ReLU, Sigmoid
from app.policies.base import PolicyModel

HIDDEN_1 = 120
HIDDEN_2 = 80


class DNNPolicy(PolicyModel):
    """N -> 120 -> 80 -> N fully connected network with a sigmoid head."""

    variant = "dnn"

    def __init__(self, n_devices: int, rng: np.random.Generator):
        super().__init__(n_devices)
        self.layers = [
            ("fc1", Linear(n_devices, HIDDEN_1, rng)),
            ("relu1", ReLU()),
            ("fc2", Linear(HIDDEN_1, HIDDEN_2, rng)),
            ("relu2", ReLU()),
            ("fc3", Linear(HIDDEN_2, n_devices, rng)),
            ("sigmoid", Sigmoid()),
        ]

    def modules(self):
        return self.layers

    def forward(self, inputs: np.ndarray) -> np.ndarray:
        out = inputs
        for _, layer in self.layers:
            out = layer.forward(out)
        return out

    def backward(self, dm: np.ndarray) -> None:
        grad = dm
        for _, layer in reversed(self.layers):
            grad = layer.backward(grad)
