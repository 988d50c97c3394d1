"""Reward shaping over vision-language embeddings.

Core pieces: task-direction projection of text and image embeddings,
quantile-calibrated sigmoid gating of similarity scores, multi-stage
subtask transitions, sparse-plus-shaped reward fusion, and desk-scale
synthetic verification of the projection's SNR and monotonicity claims.
"""

from .config import RunConfig
from .geometry import (
    ProjectionConfig,
    Projector,
    TaskDirection,
    apply_projection,
    cosine_similarity,
    decompose,
    make_projector,
    progress_coordinate,
    project_image,
    project_text,
    text_direction,
)
from .shaping import GateConfig, NoiseCalibrator, RewardShaper, gate
from .stages import FusionConfig, StageMachine, StageSpec, fuse

__all__ = [
    "RunConfig",
    "ProjectionConfig",
    "Projector",
    "TaskDirection",
    "apply_projection",
    "cosine_similarity",
    "decompose",
    "make_projector",
    "progress_coordinate",
    "project_image",
    "project_text",
    "text_direction",
    "GateConfig",
    "NoiseCalibrator",
    "RewardShaper",
    "gate",
    "FusionConfig",
    "StageMachine",
    "StageSpec",
    "fuse",
]

__version__ = "0.1.0"
