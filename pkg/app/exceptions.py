# FILE: app/exceptions.py
# ============================================================================
from typing import Optional


class LabError(Exception):
    """Base class for every error raised by the offloading lab."""


class InvalidArgumentError(LabError, ValueError):
    """An argument is outside its documented domain or has the wrong shape."""


class InvalidStateError(LabError, RuntimeError):
    """An operation was called on an object that cannot serve it yet."""


class EnumerationLimitError(InvalidArgumentError):
    """Exhaustive enumeration was requested above the configured cap."""

    def __init__(self, n_devices: int, cap: int):
        super().__init__(
            f"exhaustive enumeration supports at most {cap} devices, got {n_devices}"
        )
        self.n_devices = n_devices
        self.cap = cap


class SolverError(LabError):
    """No candidate of a frame could be allocated."""


class FrameError(LabError):
    """A failure inside the online loop, tagged with the frame it happened in."""

    def __init__(self, frame_index: int, cause: Optional[BaseException] = None):
        message = f"frame {frame_index} failed"
        if cause is not None:
            message = f"{message}: {cause}"
        super().__init__(message)
        self.frame_index = frame_index
        self.cause = cause


class RunNotFoundError(LabError):
    """No run directory exists for the requested id."""

    def __init__(self, run_id: str):
        super().__init__(f"Run not found: {run_id}")
        self.run_id = run_id
