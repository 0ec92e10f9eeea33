# FILE: app/schemas/experiment.py
# ============================================================================
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.config import settings
from app.exceptions import InvalidArgumentError
from app.schemas.params import SystemParams

Algorithm = Literal["dnn-op", "dnn-ugq", "rnn-op", "rnn-ugq", "qdnn-ugq", "qattn-ugq"]
ReferenceMode = Literal["auto", "exhaustive", "local-search"]

ALGORITHMS: Tuple[str, ...] = ("dnn-op", "dnn-ugq", "rnn-op", "rnn-ugq", "qdnn-ugq", "qattn-ugq")
TABLE_ALGORITHMS: Tuple[str, ...] = ("dnn-op", "dnn-ugq", "rnn-op", "rnn-ugq")


def default_frames(devices: int) -> int:
    return 10000 if devices <= 10 else 30000


class ExperimentConfig(BaseModel):
    """One experiment run; unset fields resolve to their defaults on validation."""

    devices: int = Field(..., ge=1)
    frames: Optional[int] = Field(None, ge=0)
    algo: Algorithm = "rnn-ugq"
    candidates: Optional[int] = Field(None, ge=1, description="K, defaults to the device count")
    sigma: float = Field(default_factory=lambda: settings.DEFAULT_SIGMA, ge=0)
    seed: int = 0
    out_dir: Optional[str] = None
    params_file: Optional[str] = None
    reference: ReferenceMode = "auto"
    smoothing_window: int = Field(default_factory=lambda: settings.SMOOTHING_WINDOW, ge=1)
    record_timing: bool = True
    resume: Optional[str] = None

    model_config = ConfigDict(extra="forbid")

    @model_validator(mode="after")
    def resolve_defaults(self) -> "ExperimentConfig":
        if self.frames is None:
            self.frames = default_frames(self.devices)
        if self.candidates is None:
            self.candidates = self.devices
        if self.quantizer == "op" and self.candidates > self.devices + 1:
            raise ValueError(
                f"order-preserving quantization yields at most {self.devices + 1} candidates"
            )
        if self.reference == "exhaustive" and self.devices > settings.ENUMERATION_CAP:
            raise ValueError(
                f"exhaustive reference is limited to {settings.ENUMERATION_CAP} devices"
            )
        return self

    @property
    def variant(self) -> str:
        return self.algo.split("-")[0]

    @property
    def quantizer(self) -> str:
        return self.algo.split("-")[1]

    @property
    def run_id(self) -> str:
        return f"{self.algo}-n{self.devices}-s{self.seed}"


class RunSummary(BaseModel):
    """Contents of summary.json."""

    run_id: str
    algo: str
    devices: int
    frames: int
    seed: int
    candidates: int
    reference: str
    average_normalized_rate: Optional[float] = None
    average_decision_time_s: Optional[float] = None
    total_time_s: Optional[float] = None
    early_normalized_rate: Optional[float] = None
    converged_rate_variance: Optional[float] = None
    final_loss: Optional[float] = None


class CurveResponse(BaseModel):
    run_id: str
    window: int
    frame: List[int]
    normalized_rate: List[float]
    loss: List[Optional[float]]


class RunLaunchResponse(BaseModel):
    run_id: str
    out_dir: str
    status: Literal["accepted"] = "accepted"


def resolve_system_params(config: ExperimentConfig) -> SystemParams:
    """SystemParams from ``params_file`` when given, else defaults drawn from the seed."""
    if config.params_file:
        params = SystemParams.from_json_file(config.params_file)
        if params.n_devices != config.devices:
            raise InvalidArgumentError(
                f"{config.params_file} describes {params.n_devices} devices, run asks for {config.devices}"
            )
        return params
    return SystemParams.default(config.devices, seed=config.seed)
