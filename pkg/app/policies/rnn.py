# FILE: app/policies/rnn.py
# ============================================================================
from typing import List, Optional, Tuple

import numpy as np

from app.exceptions import InvalidArgumentError
from app.nn.layers import GRU, BatchNorm, Dropout, Linear, Sigmoid
from app.policies.base import PolicyModel

HIDDEN = 128
DROPOUT = 0.1

Hidden = List[np.ndarray]


class RNNPolicy(PolicyModel):
    """Two stacked GRU layers with batchnorm and dropout between them.

    Training consumes windows of consecutive frames (B, L, N) and reads the
    decision off the top layer's last step. Online inference feeds one frame
    at a time and carries both layers' hidden states across frames.
    """

    variant = "rnn"
    sequential = True

    def __init__(self, n_devices: int, rng: np.random.Generator, dropout_rng: Optional[np.random.Generator] = None):
        super().__init__(n_devices)
        dropout_rng = dropout_rng if dropout_rng is not None else rng
        self.gru1 = GRU(n_devices, HIDDEN, rng)
        self.norm = BatchNorm(HIDDEN)
        self.drop1 = Dropout(DROPOUT, dropout_rng)
        self.gru2 = GRU(HIDDEN, HIDDEN, rng)
        self.drop2 = Dropout(DROPOUT, dropout_rng)
        self.head = Linear(HIDDEN, n_devices, rng)
        self.sigmoid = Sigmoid()
        self.hidden: Optional[Hidden] = None
        self._length = 0

    def modules(self):
        return [
            ("gru1", self.gru1),
            ("norm", self.norm),
            ("drop1", self.drop1),
            ("gru2", self.gru2),
            ("drop2", self.drop2),
            ("head", self.head),
            ("sigmoid", self.sigmoid),
        ]

    def forward_sequence(
        self, windows: np.ndarray, hidden_in: Optional[Hidden] = None
    ) -> Tuple[np.ndarray, Hidden]:
        """(B, L, N) windows -> ((B, N) decisions, [h1, h2] final states)."""
        windows = np.asarray(windows, dtype=float)
        if windows.ndim != 3 or windows.shape[1] < 1 or windows.shape[2] != self.n_devices:
            raise InvalidArgumentError(f"RNN input must be (B, L >= 1, {self.n_devices})")
        h1_in, h2_in = hidden_in if hidden_in is not None else (None, None)
        self._length = windows.shape[1]
        out1, h1 = self.gru1.forward(windows, h1_in)
        out = self.drop1.forward(self.norm.forward(out1))
        out2, h2 = self.gru2.forward(out, h2_in)
        last = self.drop2.forward(out2)[:, -1, :]
        return self.sigmoid.forward(self.head.forward(last)), [h1, h2]

    def forward(self, inputs: np.ndarray) -> np.ndarray:
        m, _ = self.forward_sequence(inputs)
        return m

    def backward(self, dm: np.ndarray) -> None:
        d_last = self.head.backward(self.sigmoid.backward(dm))
        d_out2 = np.zeros((d_last.shape[0], self._length, HIDDEN))
        d_out2[:, -1, :] = d_last
        d_mid, _ = self.gru2.backward(self.drop2.backward(d_out2))
        self.gru1.backward(self.norm.backward(self.drop1.backward(d_mid)))

    def predict(self, h_scaled: np.ndarray) -> np.ndarray:
        frame = np.asarray(h_scaled, dtype=float)[None, None, :]
        m, self.hidden = self.forward_sequence(frame, self.hidden)
        return m[0]

    def reset_hidden(self) -> None:
        self.hidden = None
