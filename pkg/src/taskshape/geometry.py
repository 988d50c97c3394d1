"""Embedding-space vector primitives and the task-direction projection operator.

All functions work on 1-D numpy float arrays. Inputs are validated and
promoted to float64; nothing here mutates its arguments, so everything is
safe to share across threads.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimMismatchError, NonFiniteError, ZeroVectorError

ZERO_NORM_EPS = 1e-12


def as_vector(values) -> np.ndarray:
    """Coerce to a finite 1-D float64 array of dimension >= 2."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise DimMismatchError(f"expected a 1-D vector, got shape {v.shape}")
    if v.size < 2:
        raise DimMismatchError(f"embedding dimension must be >= 2, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise NonFiniteError("vector contains NaN or infinity")
    return v


def _check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimMismatchError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")


@dataclass(frozen=True)
class TaskDirection:
    """A nonzero direction in embedding space (goal minus start displacement)."""

    d: np.ndarray
    norm: float

    @classmethod
    def from_vector(cls, d) -> "TaskDirection":
        d = as_vector(d)
        norm = float(np.linalg.norm(d))
        if norm < ZERO_NORM_EPS:
            raise ZeroVectorError("task direction is numerically zero")
        return cls(d=d, norm=norm)

    @property
    def dim(self) -> int:
        return self.d.size


@dataclass(frozen=True)
class ProjectionConfig:
    """Blend factor between the pure direction projection and the identity."""

    alpha: float = 0.8

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")


@dataclass(frozen=True)
class Projector:
    """Anisotropic operator keeping the along-d component and shrinking the rest.

    apply(x) = alpha * (<x, d> / ||d||^2) * d + (1 - alpha) * x
    """

    direction: TaskDirection
    alpha: float

    def apply(self, x) -> np.ndarray:
        x = as_vector(x)
        d = self.direction.d
        _check_same_dim(x, d)
        coeff = float(np.dot(x, d)) / (self.direction.norm ** 2)
        return self.alpha * coeff * d + (1.0 - self.alpha) * x


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between a and b, clamped to [-1, 1]."""
    a = as_vector(a)
    b = as_vector(b)
    _check_same_dim(a, b)
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na < ZERO_NORM_EPS or nb < ZERO_NORM_EPS:
        raise ZeroVectorError("cosine similarity undefined for zero vector")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def make_projector(d: TaskDirection, cfg: ProjectionConfig) -> Projector:
    return Projector(direction=d, alpha=cfg.alpha)


def apply_projection(p: Projector, x) -> np.ndarray:
    return p.apply(x)


def text_direction(e_task, e_baseline) -> TaskDirection:
    """Direction isolating the task-specific part of an instruction embedding."""
    e_task = as_vector(e_task)
    e_baseline = as_vector(e_baseline)
    _check_same_dim(e_task, e_baseline)
    return TaskDirection.from_vector(e_task - e_baseline)


def project_text(e_lk, d_text: TaskDirection, cfg: ProjectionConfig) -> np.ndarray:
    return make_projector(d_text, cfg).apply(e_lk)


def project_image(e_ot, e_start, d_img: TaskDirection, cfg: ProjectionConfig) -> np.ndarray:
    """Project the observation's displacement from start, then shift back.

    Returns P_d(e_ot - e_start) + e_start, so e_start is a fixed point for
    any alpha and displacements parallel to d pass through unchanged.
    """
    e_ot = as_vector(e_ot)
    e_start = as_vector(e_start)
    _check_same_dim(e_ot, e_start)
    return make_projector(d_img, cfg).apply(e_ot - e_start) + e_start


def progress_coordinate(e_ot, e_start, d_img: TaskDirection) -> float:
    """Scalar coordinate of the observation along the task direction.

    0 at the start embedding, 1 at start + d.
    """
    e_ot = as_vector(e_ot)
    e_start = as_vector(e_start)
    _check_same_dim(e_ot, e_start)
    _check_same_dim(e_ot, d_img.d)
    return float(np.dot(e_ot - e_start, d_img.d)) / (d_img.norm ** 2)


def decompose(e_ot, e_start, d_img: TaskDirection) -> tuple[float, np.ndarray]:
    """Split the displacement into c * d plus a residual orthogonal to d."""
    c = progress_coordinate(e_ot, e_start, d_img)
    eps = (as_vector(e_ot) - as_vector(e_start)) - c * d_img.d
    return c, eps
