# FILE: app/services/trainer.py
# ============================================================================
"""Online learning loop: observe, decide, score candidates, store, train."""
import time
from collections import deque
from pathlib import Path
from typing import Iterator, List, NamedTuple, Optional, Union

import numpy as np

from app.core.config import settings
from app.core.logging import get_logger
from app.exceptions import FrameError, InvalidArgumentError, InvalidStateError, SolverError
from app.models.channel import ChannelRealization
from app.models.decision import CandidateSet
from app.models.experience import Experience, FrameMetrics
from app.nn.optim import AdamState
from app.policies.base import PolicyModel, train_step
from app.policies.factory import build_policy
from app.schemas.experiment import ExperimentConfig, resolve_system_params
from app.schemas.params import SystemParams
from app.services.environment import ChannelSimulator
from app.services.quantize import quantize
from app.services.solver import exhaustive_best, local_search_best, normalized_rate, solve_p2_batch

logger = get_logger(__name__)

PROGRESS_INTERVAL = 1000


class ReplayBuffer:
    """Fixed-capacity ring of experiences; the oldest entry is overwritten first."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise InvalidArgumentError("replay capacity must be at least 1")
        self.capacity = capacity
        self._entries: List[Experience] = []
        self._next = 0

    def __len__(self) -> int:
        return len(self._entries)

    def push(self, experience: Experience) -> None:
        if len(self._entries) < self.capacity:
            self._entries.append(experience)
        else:
            self._entries[self._next] = experience
        self._next = (self._next + 1) % self.capacity

    def entries(self) -> List[Experience]:
        """Stored experiences, oldest first."""
        if len(self._entries) < self.capacity:
            return list(self._entries)
        return self._entries[self._next:] + self._entries[:self._next]

    def sample(self, batch_size: int, rng: np.random.Generator) -> List[Experience]:
        """Uniform draws with replacement."""
        if not self._entries:
            raise InvalidStateError("cannot sample from an empty replay buffer")
        if batch_size < 1:
            raise InvalidArgumentError("batch size must be at least 1")
        indices = rng.integers(0, len(self._entries), size=batch_size)
        return [self._entries[i] for i in indices]


class SelectedAction(NamedTuple):
    decision: np.ndarray
    value: float
    index: int
    values: np.ndarray


def select_action(
    m: np.ndarray,
    channel: ChannelRealization,
    k: int,
    quantizer: str,
    params: SystemParams,
    sigma: float = 0.0,
    rng: Optional[np.random.Generator] = None,
    candidates: Optional[Union[CandidateSet, np.ndarray]] = None,
    tol: Optional[float] = None,
) -> SelectedAction:
    """Score every candidate and keep the best; earlier candidates win ties.

    ``candidates`` bypasses quantization with an explicit decision list.
    Candidates whose allocation fails to converge are excluded.
    """
    if k < 1:
        raise InvalidArgumentError("K must be at least 1")
    if candidates is None:
        candidates = quantize(m, k, quantizer, sigma, rng)
    actions = candidates.actions if isinstance(candidates, CandidateSet) else np.asarray(candidates)
    solution = solve_p2_batch(channel, actions, params, tol)
    values = np.where(solution.converged, solution.values, -np.inf)
    if not np.isfinite(values).any():
        raise SolverError(f"all {len(values)} candidates failed to converge")
    best = int(np.argmax(values))
    return SelectedAction(
        decision=actions[best].astype(np.int8),
        value=float(values[best]),
        index=best,
        values=values,
    )


class OnlineTrainer:
    """Drives one policy through the frame loop.

    Random streams for channels, initialization, dropout, quantizer noise,
    replay sampling and the local-search reference are spawned from one seed,
    so a run is reproducible frame for frame.
    """

    def __init__(
        self,
        params: SystemParams,
        variant: str,
        quantizer: str,
        candidates: int,
        sigma: float,
        seed: int = 0,
        reference: str = "auto",
        record_timing: bool = True,
        checkpoint_dir: Optional[Union[str, Path]] = None,
        resume: Optional[Union[str, Path]] = None,
    ):
        if quantizer not in ("op", "ugq"):
            raise InvalidArgumentError(f"unknown quantizer: {quantizer}")
        if reference not in ("auto", "exhaustive", "local-search"):
            raise InvalidArgumentError(f"unknown reference mode: {reference}")
        self.params = params
        self.quantizer = quantizer
        self.candidates = candidates
        self.sigma = sigma
        self.record_timing = record_timing
        self.checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir else None
        self.use_exhaustive = reference == "exhaustive" or (
            reference == "auto" and params.n_devices <= settings.ENUMERATION_CAP
        )

        streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(6)]
        channel_rng, init_rng, dropout_rng, self.quantizer_rng, self.replay_rng, self.search_rng = streams
        self.simulator = ChannelSimulator(params, channel_rng)
        self.policy: PolicyModel = build_policy(variant, params.n_devices, init_rng, dropout_rng)
        self.optimizer = AdamState(lr=settings.LEARNING_RATE)
        self.buffer = ReplayBuffer(settings.REPLAY_CAPACITY)
        self.window: deque = deque(maxlen=settings.RNN_WINDOW)
        self._recent = deque(maxlen=PROGRESS_INTERVAL)

        if resume is not None:
            checkpoint = self.policy.load(resume)
            logger.info("policy_restored", path=str(resume), frame_index=checkpoint.frame_index)

    def _reference_value(self, channel: ChannelRealization, selected: SelectedAction) -> float:
        if self.use_exhaustive:
            return exhaustive_best(channel, self.params).value
        searched = local_search_best(
            channel, self.params, settings.LOCAL_SEARCH_STARTS, self.search_rng
        ).value
        return max(searched, float(np.max(selected.values)))

    def _state(self, scaled: np.ndarray) -> np.ndarray:
        if not self.policy.sequential:
            return scaled
        self.window.append(scaled)
        frames = list(self.window)
        # left-pad with the earliest frame until the window is full
        frames = [frames[0]] * (settings.RNN_WINDOW - len(frames)) + frames
        return np.stack(frames)

    def step(self) -> FrameMetrics:
        channel = self.simulator.next()
        t = channel.frame_index
        if self.policy.sequential and t % settings.HIDDEN_RESET_INTERVAL == 0:
            self.policy.reset_hidden()
        scaled = channel.gains * settings.INPUT_SCALE

        started = time.perf_counter()
        m = self.policy.predict(scaled)
        selected = select_action(
            m, channel, self.candidates, self.quantizer, self.params, self.sigma, self.quantizer_rng
        )
        elapsed = time.perf_counter() - started

        reference = self._reference_value(channel, selected)
        self.buffer.push(Experience(self._state(scaled), selected.decision, selected.value, t))

        loss = None
        if (t + 1) % settings.TRAIN_INTERVAL == 0:
            batch = self.buffer.sample(min(settings.BATCH_SIZE, len(self.buffer)), self.replay_rng)
            loss = train_step(self.policy, [(e.state, e.best_action) for e in batch], self.optimizer)

        if self.checkpoint_dir is not None and (t + 1) % settings.CHECKPOINT_INTERVAL == 0:
            path = self.checkpoint_dir / f"frame_{t + 1:06d}.ckpt"
            self.policy.save(path, frame_index=t + 1)
            logger.info("checkpoint_saved", path=str(path), frame_index=t + 1)

        rate = normalized_rate(selected.value, reference)
        self._recent.append(rate)
        logger.debug("frame_done", frame_index=t, normalized_rate=rate, loss=loss)
        if (t + 1) % PROGRESS_INTERVAL == 0:
            logger.info(
                "training_progress",
                frame_index=t + 1,
                mean_normalized_rate=float(np.mean(self._recent)),
                loss=loss,
            )
        return FrameMetrics(
            frame_index=t,
            chosen_value=selected.value,
            reference_value=reference,
            normalized_rate=rate,
            training_loss=loss,
            decision_time_seconds=elapsed if self.record_timing else None,
        )

    def run(self, frames: int) -> Iterator[FrameMetrics]:
        if frames < 0:
            raise InvalidArgumentError("frames must be nonnegative")
        for _ in range(frames):
            frame_index = self.simulator.frame_index
            try:
                metrics = self.step()
            except FrameError:
                raise
            except Exception as exc:
                logger.error("frame_failed", frame_index=frame_index, error=str(exc))
                raise FrameError(frame_index, exc) from exc
            yield metrics


def build_trainer(
    config: ExperimentConfig,
    params: Optional[SystemParams] = None,
    checkpoint_dir: Optional[Union[str, Path]] = None,
) -> OnlineTrainer:
    return OnlineTrainer(
        params=params if params is not None else resolve_system_params(config),
        variant=config.variant,
        quantizer=config.quantizer,
        candidates=config.candidates,
        sigma=config.sigma,
        seed=config.seed,
        reference=config.reference,
        record_timing=config.record_timing,
        checkpoint_dir=checkpoint_dir,
        resume=config.resume,
    )


def run_online(
    config: ExperimentConfig,
    params: Optional[SystemParams] = None,
    checkpoint_dir: Optional[Union[str, Path]] = None,
) -> Iterator[FrameMetrics]:
    """Stream one FrameMetrics per frame of ``config``."""
    return build_trainer(config, params, checkpoint_dir).run(config.frames)
