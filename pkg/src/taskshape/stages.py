"""Ordered subtask decomposition with similarity-triggered transitions.

Each stage carries its own instruction / baseline text embeddings and
start / goal image embeddings. The per-step reward is the cosine between
the projected observation and the projected instruction; transitions fire
after `patience` consecutive steps whose *unprojected* observation-to-goal
similarity clears the threshold.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteError
from .geometry import (
    ProjectionConfig,
    TaskDirection,
    as_vector,
    cosine_similarity,
    project_image,
    project_text,
    text_direction,
)
from .shaping import RewardShaper

DEFAULT_TRANSITION_THRESHOLD = 0.997
DEFAULT_PATIENCE = 4


@dataclass(frozen=True)
class StageSpec:
    """Embeddings defining one subtask."""

    instruction_embedding: np.ndarray
    baseline_embedding: np.ndarray
    start_image_embedding: np.ndarray
    goal_image_embedding: np.ndarray

    def __post_init__(self):
        for name in ("instruction_embedding", "baseline_embedding",
                     "start_image_embedding", "goal_image_embedding"):
            object.__setattr__(self, name, as_vector(getattr(self, name)))
        # direction must be constructible
        TaskDirection.from_vector(
            self.goal_image_embedding - self.start_image_embedding)

    @property
    def image_direction(self) -> TaskDirection:
        return TaskDirection.from_vector(
            self.goal_image_embedding - self.start_image_embedding)

    @property
    def text_direction(self) -> TaskDirection:
        return text_direction(self.instruction_embedding, self.baseline_embedding)


@dataclass
class StageMachine:
    """Tracks the active subtask and its consecutive-above-threshold counter.

    `current` never decreases; once `terminal` is set the machine keeps
    emitting rewards against the final stage but never transitions again.
    """

    stages: list[StageSpec]
    transition_threshold: float = DEFAULT_TRANSITION_THRESHOLD
    patience: int = DEFAULT_PATIENCE
    current: int = 0
    above_counter: int = 0
    terminal: bool = field(default=False)

    def __post_init__(self):
        if not self.stages:
            raise ValueError("stage machine needs at least one stage")
        if self.patience < 1:
            raise ValueError("patience must be a positive integer")
        if not (0 <= self.current < len(self.stages)):
            raise ValueError("current stage index out of range")

    @property
    def stage(self) -> StageSpec:
        return self.stages[self.current]

    def current_direction(self) -> TaskDirection:
        return self.stage.image_direction

    def step(self, e_ot, geom_cfg: ProjectionConfig) -> tuple[float, bool]:
        """Advance one observation; returns (raw_reward, transitioned)."""
        spec = self.stage
        d_img = spec.image_direction
        d_text = spec.text_direction
        proj_obs = project_image(e_ot, spec.start_image_embedding, d_img, geom_cfg)
        proj_goal = project_text(spec.instruction_embedding, d_text, geom_cfg)
        raw_reward = cosine_similarity(proj_obs, proj_goal)

        transition = False
        if not self.terminal:
            s = cosine_similarity(e_ot, spec.goal_image_embedding)
            if s >= self.transition_threshold:
                self.above_counter += 1
            else:
                self.above_counter = 0
            if self.above_counter >= self.patience:
                self.above_counter = 0
                transition = True
                if self.current + 1 < len(self.stages):
                    self.current += 1
                else:
                    self.terminal = True
        return raw_reward, transition

    def shaped_step(self, e_ot, geom_cfg: ProjectionConfig,
                    shaper: RewardShaper) -> tuple[float, bool]:
        """Like step, but routes the raw reward through the gating pipeline."""
        raw_reward, transition = self.step(e_ot, geom_cfg)
        return shaper.shape(raw_reward), transition


@dataclass(frozen=True)
class FusionConfig:
    """Weight of the shaped reward added on top of the sparse task reward."""

    rho: float = 0.05

    def __post_init__(self):
        if self.rho < 0:
            raise ValueError(f"rho must be nonnegative, got {self.rho}")


def fuse(r_task: float, r_vlm: float, cfg: FusionConfig) -> float:
    """r_task + rho * r_vlm."""
    if not (np.isfinite(r_task) and np.isfinite(r_vlm)):
        raise NonFiniteError("rewards must be finite")
    return float(r_task) + cfg.rho * float(r_vlm)
