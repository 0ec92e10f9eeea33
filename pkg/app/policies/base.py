# FILE: app/policies/base.py
# ============================================================================
"""Shared interface of the policy networks.

Every variant maps scaled channel inputs to a relaxed decision vector in
(0, 1)^N, trains on BCE toward the best evaluated candidate, and serializes
to the flat checkpoint layout with its variant name in the header.
"""
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from app.exceptions import InvalidArgumentError
from app.nn.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from app.nn.functional import bce_loss
from app.nn.layers import BatchNorm, Module
from app.nn.optim import AdamState, adam_step


class PolicyModel(ABC):
    variant: str = ""
    # Feed-forward variants take (B, N) inputs, the recurrent one (B, L, N).
    sequential: bool = False

    def __init__(self, n_devices: int):
        if n_devices < 1:
            raise InvalidArgumentError("a policy needs at least one device")
        self.n_devices = n_devices
        self.training = False

    @abstractmethod
    def modules(self) -> List[Tuple[str, Module]]:
        """Named sub-layers in forward order."""

    @abstractmethod
    def forward(self, inputs: np.ndarray) -> np.ndarray:
        """Batched relaxed decisions (B, N); caches what backward needs."""

    @abstractmethod
    def backward(self, dm: np.ndarray) -> None:
        """Fill every sub-layer's gradients from dLoss/dm."""

    def predict(self, h_scaled: np.ndarray) -> np.ndarray:
        """Inference-mode decision for one frame."""
        return self.forward(np.asarray(h_scaled, dtype=float)[None, :])[0]

    def reset_hidden(self) -> None:
        """Feed-forward variants carry no state between frames."""

    def train(self, mode: bool = True) -> "PolicyModel":
        self.training = mode
        for _, module in self.modules():
            module.train(mode)
        return self

    def parameters(self) -> Dict[str, np.ndarray]:
        return {
            name: value
            for prefix, module in self.modules()
            for name, value in module.named_parameters(f"{prefix}.")
        }

    def gradients(self) -> Dict[str, np.ndarray]:
        return {
            name: value
            for prefix, module in self.modules()
            for name, value in module.named_gradients(f"{prefix}.")
        }

    def parameter_count(self) -> int:
        return int(sum(value.size for value in self.parameters().values()))

    def state_tensors(self) -> Dict[str, np.ndarray]:
        tensors = dict(self.parameters())
        for prefix, module in self.modules():
            if isinstance(module, BatchNorm):
                tensors[f"{prefix}.running_mean"] = module.running_mean
                tensors[f"{prefix}.running_var"] = module.running_var
        return tensors

    def load_state_tensors(self, tensors: Dict[str, np.ndarray]) -> None:
        own = self.state_tensors()
        if set(own) != set(tensors):
            raise InvalidArgumentError("checkpoint tensors do not match this model")
        for name, value in tensors.items():
            if own[name].shape != value.shape:
                raise InvalidArgumentError(f"tensor {name} has shape {value.shape}, expected {own[name].shape}")
            own[name][...] = value

    def save(self, path: Union[str, Path], frame_index: int = 0) -> None:
        save_checkpoint(path, self.variant, frame_index, self.state_tensors())

    def load(self, path: Union[str, Path]) -> Checkpoint:
        checkpoint = load_checkpoint(path)
        if checkpoint.variant != self.variant:
            raise InvalidArgumentError(
                f"checkpoint holds a {checkpoint.variant} model, not {self.variant}"
            )
        self.load_state_tensors(checkpoint.tensors)
        return checkpoint


def train_step(
    model: PolicyModel,
    batch: Sequence[Tuple[np.ndarray, np.ndarray]],
    optimizer: AdamState,
) -> float:
    """One Adam update on mean BCE over ``batch``; returns the pre-update loss."""
    if len(batch) == 0:
        raise InvalidArgumentError("training batch is empty")
    inputs = np.stack([np.asarray(state, dtype=float) for state, _ in batch])
    targets = np.stack([np.asarray(action, dtype=float) for _, action in batch])
    model.train(True)
    try:
        m = model.forward(inputs)
        loss, grad = bce_loss(m, targets)
        model.backward(grad)
        adam_step(model.parameters(), model.gradients(), optimizer)
    finally:
        model.train(False)
    return loss
