# FILE: app/policies/factory.py
# ============================================================================
from typing import Optional

import numpy as np

from app.exceptions import InvalidArgumentError
from app.policies.base import PolicyModel
from app.policies.dnn import DNNPolicy
from app.policies.quantum import QuantumAttentionPolicy, QuantumDNNPolicy
from app.policies.rnn import RNNPolicy

VARIANTS = ("dnn", "rnn", "qdnn", "qattn")


def build_policy(
    variant: str,
    n_devices: int,
    rng: np.random.Generator,
    dropout_rng: Optional[np.random.Generator] = None,
    variational_axis: str = "Y",
) -> PolicyModel:
    if variant == "dnn":
        return DNNPolicy(n_devices, rng)
    if variant == "rnn":
        return RNNPolicy(n_devices, rng, dropout_rng)
    if variant == "qdnn":
        return QuantumDNNPolicy(n_devices, rng, variational_axis)
    if variant == "qattn":
        return QuantumAttentionPolicy(n_devices, rng, variational_axis)
    raise InvalidArgumentError(f"unknown policy variant: {variant}")
