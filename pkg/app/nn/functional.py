# FILE: app/nn/functional.py
# ============================================================================
"""Forward/backward pairs for the layers the policies are built from.

Every forward returns its output and a cache; the matching backward takes the
upstream gradient and the cache and returns exact gradients. Shapes are
batch-first.
"""
import math
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np
from scipy.special import expit, softmax

from app.exceptions import InvalidArgumentError

BCE_CLAMP = 1e-7
BN_EPS = 1e-5
BN_MOMENTUM = 0.9

Params = Dict[str, np.ndarray]


def uniform_init(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    """U(-1/sqrt(fan_in), 1/sqrt(fan_in))."""
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def sigmoid(x: np.ndarray) -> np.ndarray:
    return expit(x)


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


# ---------------------------------------------------------------- linear

def linear_forward(x: np.ndarray, W: np.ndarray, b: np.ndarray) -> np.ndarray:
    """y = x W + b."""
    if x.shape[-1] != W.shape[0] or b.shape != (W.shape[1],):
        raise InvalidArgumentError(
            f"linear shapes do not conform: x {x.shape}, W {W.shape}, b {b.shape}"
        )
    return x @ W + b


def linear_backward(
    grad_y: np.ndarray, x: np.ndarray, W: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of y = x W + b with respect to x, W and b."""
    x2 = x.reshape(-1, x.shape[-1])
    g2 = grad_y.reshape(-1, grad_y.shape[-1])
    return grad_y @ W.T, x2.T @ g2, g2.sum(axis=0)


# ---------------------------------------------------------------- GRU

GRU_KEYS = ("W_z", "U_z", "b_z", "W_r", "U_r", "b_r", "W_h", "U_h", "b_h")


def gru_cell_forward(x_t: np.ndarray, h_prev: np.ndarray, p: Params):
    """One GRU step.

    z = sigma(x W_z + h U_z + b_z), r = sigma(x W_r + h U_r + b_r),
    h~ = tanh(x W_h + (r * h) U_h + b_h), h' = (1 - z) * h + z * h~.
    """
    if x_t.shape[-1] != p["W_z"].shape[0] or h_prev.shape[-1] != p["U_z"].shape[0]:
        raise InvalidArgumentError("GRU input or state has the wrong width")
    z = sigmoid(x_t @ p["W_z"] + h_prev @ p["U_z"] + p["b_z"])
    r = sigmoid(x_t @ p["W_r"] + h_prev @ p["U_r"] + p["b_r"])
    rh = r * h_prev
    h_tilde = np.tanh(x_t @ p["W_h"] + rh @ p["U_h"] + p["b_h"])
    h_new = (1.0 - z) * h_prev + z * h_tilde
    return h_new, (x_t, h_prev, z, r, rh, h_tilde)


def gru_cell_backward(dh_new: np.ndarray, cache, p: Params, grads: Params):
    """Backward of one GRU step; parameter gradients accumulate into ``grads``."""
    x_t, h_prev, z, r, rh, h_tilde = cache
    dz = dh_new * (h_tilde - h_prev)
    dh_prev = dh_new * (1.0 - z)

    da_h = dh_new * z * (1.0 - h_tilde ** 2)
    grads["W_h"] += x_t.T @ da_h
    grads["U_h"] += rh.T @ da_h
    grads["b_h"] += da_h.sum(axis=0)
    drh = da_h @ p["U_h"].T
    dr = drh * h_prev
    dh_prev += drh * r

    da_z = dz * z * (1.0 - z)
    grads["W_z"] += x_t.T @ da_z
    grads["U_z"] += h_prev.T @ da_z
    grads["b_z"] += da_z.sum(axis=0)

    da_r = dr * r * (1.0 - r)
    grads["W_r"] += x_t.T @ da_r
    grads["U_r"] += h_prev.T @ da_r
    grads["b_r"] += da_r.sum(axis=0)

    dh_prev += da_z @ p["U_z"].T + da_r @ p["U_r"].T
    dx = da_h @ p["W_h"].T + da_z @ p["W_z"].T + da_r @ p["W_r"].T
    return dx, dh_prev


# ---------------------------------------------------------------- batchnorm

def batchnorm_forward(
    x: np.ndarray,
    gamma: np.ndarray,
    beta: np.ndarray,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    training: bool,
    momentum: float = BN_MOMENTUM,
    eps: float = BN_EPS,
):
    """Per-feature standardization over rows; running stats update in place."""
    if training:
        if x.shape[0] < 2:
            raise InvalidArgumentError("batch normalization needs at least 2 rows in train mode")
        mean = x.mean(axis=0)
        var = x.var(axis=0)
        running_mean *= momentum
        running_mean += (1.0 - momentum) * mean
        running_var *= momentum
        running_var += (1.0 - momentum) * var
    else:
        mean, var = running_mean, running_var
    inv_std = 1.0 / np.sqrt(var + eps)
    x_hat = (x - mean) * inv_std
    return gamma * x_hat + beta, (x_hat, inv_std, gamma)


def batchnorm_backward(dy: np.ndarray, cache):
    """Train-mode backward; returns (dx, dgamma, dbeta)."""
    x_hat, inv_std, gamma = cache
    rows = dy.shape[0]
    dgamma = (dy * x_hat).sum(axis=0)
    dbeta = dy.sum(axis=0)
    dx_hat = dy * gamma
    dx = inv_std / rows * (
        rows * dx_hat - dx_hat.sum(axis=0) - x_hat * (dx_hat * x_hat).sum(axis=0)
    )
    return dx, dgamma, dbeta


# ---------------------------------------------------------------- dropout

def dropout_forward(x: np.ndarray, rate: float, rng: np.random.Generator, training: bool):
    """Inverted dropout; identity outside training."""
    if not training or rate <= 0.0:
        return x, None
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * mask, mask


def dropout_backward(dy: np.ndarray, mask):
    return dy if mask is None else dy * mask


# ---------------------------------------------------------------- attention

@dataclass
class AttentionWeights:
    """Per-head projections (H, n_q, d_k) and the output projection (H*d_k, n_q)."""

    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    w_o: np.ndarray

    def __post_init__(self):
        heads, n_q, d_k = self.w_q.shape
        if self.w_k.shape != self.w_q.shape or self.w_v.shape != self.w_q.shape:
            raise InvalidArgumentError("query, key and value projections must share a shape")
        if heads * d_k != n_q or self.w_o.shape != (heads * d_k, n_q):
            raise InvalidArgumentError("heads * head_dim must equal the model width")

    @property
    def heads(self) -> int:
        return self.w_q.shape[0]

    @property
    def head_dim(self) -> int:
        return self.w_q.shape[2]


def multi_head_attention(x: np.ndarray, w: AttentionWeights):
    """Scaled dot-product self-attention over a (B, L, n_q) batch of sequences."""
    if x.ndim != 3 or x.shape[-1] != w.w_q.shape[1]:
        raise InvalidArgumentError(f"attention input must be (B, L, {w.w_q.shape[1]})")
    batch, length, _ = x.shape
    scale = 1.0 / math.sqrt(w.head_dim)
    q = np.einsum("bln,hnd->bhld", x, w.w_q)
    k = np.einsum("bln,hnd->bhld", x, w.w_k)
    v = np.einsum("bln,hnd->bhld", x, w.w_v)
    attn = softmax(q @ k.transpose(0, 1, 3, 2) * scale, axis=-1)
    z = attn @ v
    concat = z.transpose(0, 2, 1, 3).reshape(batch, length, w.heads * w.head_dim)
    y = concat @ w.w_o
    return y, (x, q, k, v, attn, concat)


def multi_head_attention_backward(dy: np.ndarray, cache, w: AttentionWeights):
    """Returns (dx, grads) with grads keyed like the weights."""
    x, q, k, v, attn, concat = cache
    batch, length, _ = x.shape
    scale = 1.0 / math.sqrt(w.head_dim)
    d_w_o = np.einsum("blc,bln->cn", concat, dy)
    d_concat = dy @ w.w_o.T
    dz = d_concat.reshape(batch, length, w.heads, w.head_dim).transpose(0, 2, 1, 3)
    d_attn = dz @ v.transpose(0, 1, 3, 2)
    dv = attn.transpose(0, 1, 3, 2) @ dz
    d_scores = attn * (d_attn - (d_attn * attn).sum(axis=-1, keepdims=True)) * scale
    dq = d_scores @ k
    dk = d_scores.transpose(0, 1, 3, 2) @ q
    grads = {
        "w_q": np.einsum("bln,bhld->hnd", x, dq),
        "w_k": np.einsum("bln,bhld->hnd", x, dk),
        "w_v": np.einsum("bln,bhld->hnd", x, dv),
        "w_o": d_w_o,
    }
    dx = (
        np.einsum("bhld,hnd->bln", dq, w.w_q)
        + np.einsum("bhld,hnd->bln", dk, w.w_k)
        + np.einsum("bhld,hnd->bln", dv, w.w_v)
    )
    return dx, grads


# ---------------------------------------------------------------- loss

def bce_loss(m: np.ndarray, target: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean binary cross-entropy and its gradient with respect to ``m``."""
    m = np.clip(np.asarray(m, dtype=float), BCE_CLAMP, 1.0 - BCE_CLAMP)
    t = np.asarray(target, dtype=float)
    if m.shape != t.shape:
        raise InvalidArgumentError("prediction and target shapes differ")
    loss = -np.mean(t * np.log(m) + (1.0 - t) * np.log(1.0 - m))
    grad = (m - t) / (m * (1.0 - m)) / m.size
    return float(loss), grad
