# FILE: app/schemas/params.py
# ============================================================================
import math
from pathlib import Path
from typing import Any, List, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

# Speed of light used by the free-space path-loss model.
LIGHT_SPEED = 3e8


class SystemParams(BaseModel):
    """Physical and algorithmic constants of one wireless-powered MEC network.

    Frame length is normalized to one, so the energy-transfer fraction ``a``
    and the transmission fractions ``tau`` are plain fractions of a frame.
    """

    n_devices: int = Field(..., ge=1)
    power: float = Field(3.0, gt=0, description="AP transmit power P (W)")
    mu: float = Field(0.51, gt=0, le=1, description="harvesting efficiency")
    k: List[float] = Field(..., description="effective capacitance per device")
    phi: float = Field(100.0, gt=0, description="CPU cycles per bit")
    bandwidth: float = Field(2e6, gt=0, description="B (Hz)")
    noise: float = Field(1e-10, gt=0, description="N0 (W)")
    vu: float = Field(1.1, ge=1, description="communication overhead")
    weights: List[float]
    distances: List[float]
    antenna_gain: float = Field(4.11, gt=0)
    carrier_freq: float = Field(915e6, gt=0)
    pathloss_exp: float = Field(2.8, ge=0)
    frame_T: float = Field(1.0, gt=0)

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="before")
    @classmethod
    def broadcast_k(cls, data: Any) -> Any:
        """Expand a scalar capacitance coefficient to every device."""
        if isinstance(data, dict) and isinstance(data.get("k"), (int, float)):
            data = dict(data)
            data["k"] = [float(data["k"])] * int(data.get("n_devices", 1))
        return data

    @model_validator(mode="after")
    def check_vectors(self) -> "SystemParams":
        for name in ("k", "weights", "distances"):
            values = getattr(self, name)
            if len(values) != self.n_devices:
                raise ValueError(
                    f"{name} has {len(values)} entries, expected {self.n_devices}"
                )
            if any(not (v > 0 and math.isfinite(v)) for v in values):
                raise ValueError(f"every entry of {name} must be positive and finite")
        if not (math.isfinite(self.eta1) and self.eta1 > 0):
            raise ValueError("eta1 must be finite and positive")
        return self

    @classmethod
    def default(
        cls,
        n_devices: int,
        seed: int = 0,
        distances: Optional[List[float]] = None,
        **overrides: Any,
    ) -> "SystemParams":
        """Build the reference network.

        Devices are numbered from one: odd-numbered devices weigh 1.0 and
        even-numbered ones 1.5. Distances are drawn uniformly on (2.5, 5.2) m
        from ``seed`` unless given.
        """
        if distances is None:
            rng = np.random.default_rng(seed)
            distances = rng.uniform(2.5, 5.2, size=n_devices).tolist()
        data = {
            "n_devices": n_devices,
            "k": [1e-26] * n_devices,
            "weights": [1.0 if i % 2 == 0 else 1.5 for i in range(n_devices)],
            "distances": list(distances),
        }
        data.update(overrides)
        return cls.model_validate(data)

    @classmethod
    def from_json_file(cls, path: Union[str, Path]) -> "SystemParams":
        return cls.model_validate_json(Path(path).read_text())

    def to_json_file(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.model_dump_json(indent=2))

    @property
    def eta1(self) -> float:
        """(mu * P)^(1/3) / phi."""
        return (self.mu * self.power) ** (1.0 / 3.0) / self.phi

    @property
    def k_values(self) -> np.ndarray:
        return np.asarray(self.k, dtype=float)

    @property
    def weight_values(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    @property
    def distance_values(self) -> np.ndarray:
        return np.asarray(self.distances, dtype=float)
