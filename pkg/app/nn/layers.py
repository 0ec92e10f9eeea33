# FILE: app/nn/layers.py
# ============================================================================
from typing import Dict, Iterator, Optional, Tuple

import numpy as np

from app.nn import functional as F


class Module:
    """Base layer: owns named parameters and their gradients."""

    def __init__(self):
        self.params: Dict[str, np.ndarray] = {}
        self.grads: Dict[str, np.ndarray] = {}
        self.training = False

    def zero_grad(self) -> None:
        self.grads = {name: np.zeros_like(value) for name, value in self.params.items()}

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, np.ndarray]]:
        for name, value in self.params.items():
            yield f"{prefix}{name}", value

    def named_gradients(self, prefix: str = "") -> Iterator[Tuple[str, np.ndarray]]:
        for name, value in self.params.items():
            yield f"{prefix}{name}", self.grads.get(name, np.zeros_like(value))

    def train(self, mode: bool = True) -> "Module":
        self.training = mode
        return self


class Linear(Module):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator):
        super().__init__()
        self.params["W"] = F.uniform_init(rng, in_features, (in_features, out_features))
        self.params["b"] = F.uniform_init(rng, in_features, (out_features,))
        self.zero_grad()
        self._x = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        return F.linear_forward(x, self.params["W"], self.params["b"])

    def backward(self, dy: np.ndarray) -> np.ndarray:
        dx, dW, db = F.linear_backward(dy, self._x, self.params["W"])
        self.grads["W"] = dW
        self.grads["b"] = db
        return dx


class ReLU(Module):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return dy * self._mask


class Sigmoid(Module):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self._y = F.sigmoid(x)
        return self._y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return dy * self._y * (1.0 - self._y)


class Dropout(Module):
    def __init__(self, rate: float, rng: np.random.Generator):
        super().__init__()
        self.rate = rate
        self.rng = rng
        self._mask = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        y, self._mask = F.dropout_forward(x, self.rate, self.rng, self.training)
        return y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return F.dropout_backward(dy, self._mask)


class BatchNorm(Module):
    """Normalizes the last axis; leading axes are pooled as rows."""

    def __init__(self, features: int):
        super().__init__()
        self.params["gamma"] = np.ones(features)
        self.params["beta"] = np.zeros(features)
        self.running_mean = np.zeros(features)
        self.running_var = np.ones(features)
        self.zero_grad()
        self._cache = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        shape = x.shape
        y, self._cache = F.batchnorm_forward(
            x.reshape(-1, shape[-1]),
            self.params["gamma"],
            self.params["beta"],
            self.running_mean,
            self.running_var,
            self.training,
        )
        return y.reshape(shape)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        shape = dy.shape
        if self.training:
            dx, dgamma, dbeta = F.batchnorm_backward(dy.reshape(-1, shape[-1]), self._cache)
        else:
            x_hat, inv_std, gamma = self._cache
            flat = dy.reshape(-1, shape[-1])
            dx, dgamma, dbeta = flat * gamma * inv_std, (flat * x_hat).sum(axis=0), flat.sum(axis=0)
        self.grads["gamma"] = dgamma
        self.grads["beta"] = dbeta
        return dx.reshape(shape)


class GRU(Module):
    """Single GRU layer unrolled over a (B, L, in) sequence."""

    def __init__(self, input_size: int, hidden_size: int, rng: np.random.Generator):
        super().__init__()
        self.hidden_size = hidden_size
        for gate in ("z", "r", "h"):
            self.params[f"W_{gate}"] = F.uniform_init(rng, hidden_size, (input_size, hidden_size))
            self.params[f"U_{gate}"] = F.uniform_init(rng, hidden_size, (hidden_size, hidden_size))
            self.params[f"b_{gate}"] = F.uniform_init(rng, hidden_size, (hidden_size,))
        self.zero_grad()
        self._caches = []

    def forward(self, x: np.ndarray, h0: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
        batch, length, _ = x.shape
        h = np.zeros((batch, self.hidden_size)) if h0 is None else h0
        self._caches = []
        outputs = np.empty((batch, length, self.hidden_size))
        for t in range(length):
            h, cache = F.gru_cell_forward(x[:, t, :], h, self.params)
            self._caches.append(cache)
            outputs[:, t, :] = h
        return outputs, h

    def backward(self, d_outputs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Backprop through time; returns (dx, dh0)."""
        self.zero_grad()
        batch, length, _ = d_outputs.shape
        dx = np.empty((batch, length, self.params["W_z"].shape[0]))
        dh = np.zeros((batch, self.hidden_size))
        for t in reversed(range(length)):
            dx[:, t, :], dh = F.gru_cell_backward(
                d_outputs[:, t, :] + dh, self._caches[t], self.params, self.grads
            )
        return dx, dh


class MultiHeadAttention(Module):
    def __init__(self, width: int, heads: int, rng: np.random.Generator):
        super().__init__()
        head_dim = width // heads
        for name in ("w_q", "w_k", "w_v"):
            self.params[name] = F.uniform_init(rng, width, (heads, width, head_dim))
        self.params["w_o"] = F.uniform_init(rng, heads * head_dim, (heads * head_dim, width))
        self.weights()
        self.zero_grad()
        self._cache = None

    def weights(self) -> F.AttentionWeights:
        return F.AttentionWeights(
            w_q=self.params["w_q"],
            w_k=self.params["w_k"],
            w_v=self.params["w_v"],
            w_o=self.params["w_o"],
        )

    def forward(self, x: np.ndarray) -> np.ndarray:
        y, self._cache = F.multi_head_attention(x, self.weights())
        return y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        dx, grads = F.multi_head_attention_backward(dy, self._cache, self.weights())
        self.grads.update(grads)
        return dx
