"""Synthetic embedding world: signal-plus-orthogonal-noise trajectories,
a sparse-reward gridworld that emits embeddings, camera-offset perturbation,
and SNR / monotonicity measurement.

All randomness uses numpy's default_rng (PCG64), seeded per object, so runs
are bit-reproducible.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    BadDimensionError,
    DegenerateNoiseError,
    EmptyOffsetsError,
    InvalidActionError,
    TooShortError,
)
from .geometry import (
    ProjectionConfig,
    TaskDirection,
    as_vector,
    decompose,
    make_projector,
)


def identity_progress(lam: float) -> float:
    return lam


def sqrt_progress(lam: float) -> float:
    """Saturating monotone progress map; h(0)=0, h(1)=1."""
    return lam ** 0.5


@dataclass
class LatentTaskModel:
    """Generative model e_t = e_start + h(lambda_t) * d + eps_t with eps ⊥ d."""

    e_start: np.ndarray
    direction: TaskDirection
    noise_sigma: float = 0.1
    progress_fn: Callable[[float], float] = identity_progress
    seed: int = 0

    def __post_init__(self):
        self.e_start = as_vector(self.e_start)
        if self.e_start.size != self.direction.dim:
            raise BadDimensionError("start embedding and direction dims differ")
        if self.e_start.size < 2:
            raise BadDimensionError("need dim >= 2 for an orthogonal complement")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        # monotonicity sanity check on a coarse grid
        grid = np.linspace(0.0, 1.0, 17)
        vals = [self.progress_fn(g) for g in grid]
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("progress_fn must be strictly increasing on [0, 1]")

    @property
    def dim(self) -> int:
        return self.e_start.size

    def _orthogonal_noise(self, rng: np.random.Generator) -> np.ndarray:
        d = self.direction.d
        eps = rng.normal(0.0, self.noise_sigma, size=self.dim)
        eps -= (np.dot(eps, d) / self.direction.norm ** 2) * d
        return eps

    def embed(self, lam: float, rng: np.random.Generator) -> np.ndarray:
        e = self.e_start + self.progress_fn(lam) * self.direction.d
        if self.noise_sigma > 0:
            e = e + self._orthogonal_noise(rng)
        return e


def gen_trajectory(model: LatentTaskModel, T: int) -> list[tuple[float, np.ndarray]]:
    """T embeddings at evenly spaced progress values lambda_t = t / (T - 1)."""
    if T < 2:
        raise TooShortError("trajectory needs at least 2 steps")
    rng = np.random.default_rng(model.seed)
    out = []
    for t in range(T):
        lam = t / (T - 1)
        out.append((lam, model.embed(lam, rng)))
    return out


def measure_snr(trajectory: Sequence[tuple[float, np.ndarray]],
                e_start, d: TaskDirection, alpha: float) -> tuple[float, float]:
    """Signal-to-noise energy ratio of the displacement stream, raw and projected.

    Signal energy is sum of ||c_t d||^2, noise energy the sum of squared
    orthogonal residuals, computed by decomposing each displacement before
    and after applying the projector.
    """
    e_start = as_vector(e_start)
    proj = make_projector(d, ProjectionConfig(alpha=alpha))
    sig_raw = noise_raw = sig_proj = noise_proj = 0.0
    for _, e in trajectory:
        c, eps = decompose(e, e_start, d)
        sig_raw += (c * d.norm) ** 2
        noise_raw += float(np.dot(eps, eps))
        e_proj = proj.apply(e - e_start) + e_start
        cp, epsp = decompose(e_proj, e_start, d)
        sig_proj += (cp * d.norm) ** 2
        noise_proj += float(np.dot(epsp, epsp))
    if noise_raw == 0.0 or noise_proj == 0.0:
        raise DegenerateNoiseError("noise energy is zero; SNR undefined")
    return sig_raw / noise_raw, sig_proj / noise_proj


def monotonicity_violation_rate(rewards: Sequence[float]) -> float:
    """Fraction of adjacent pairs that decrease."""
    if len(rewards) < 2:
        raise TooShortError("need at least 2 rewards")
    r = np.asarray(rewards, dtype=np.float64)
    return float(np.mean(np.diff(r) < 0))


ACTIONS = ("up", "down", "left", "right")
_MOVES = {"up": (0, -1), "down": (0, 1), "left": (-1, 0), "right": (1, 0)}


@dataclass
class GridWorld:
    """Deterministic N x N grid with a sparse success reward at the goal.

    Start is the top-left corner, goal the opposite corner by default.
    """

    size: int = 20
    max_steps: int = 100
    start: tuple[int, int] = (0, 0)
    goal: tuple[int, int] | None = None

    def __post_init__(self):
        if self.size < 2:
            raise ValueError("grid size must be >= 2")
        if self.goal is None:
            self.goal = (self.size - 1, self.size - 1)

    def reset(self) -> tuple[tuple[int, int], int]:
        """Initial (state, step_count)."""
        return self.start, 0

    def step(self, state: tuple[int, int], action: str,
             steps_taken: int) -> tuple[tuple[int, int], float, bool]:
        """One move; returns (state', r_task, done). Moves into walls are no-ops."""
        if action not in _MOVES:
            raise InvalidActionError(f"unknown action {action!r}")
        dx, dy = _MOVES[action]
        x = min(max(state[0] + dx, 0), self.size - 1)
        y = min(max(state[1] + dy, 0), self.size - 1)
        new_state = (x, y)
        success = new_state == self.goal
        done = success or (steps_taken + 1 >= self.max_steps)
        return new_state, (1.0 if success else 0.0), done

    def progress(self, state: tuple[int, int]) -> float:
        """1 - manhattan(state, goal) / manhattan(start, goal)."""
        total = abs(self.start[0] - self.goal[0]) + abs(self.start[1] - self.goal[1])
        dist = abs(state[0] - self.goal[0]) + abs(state[1] - self.goal[1])
        return 1.0 - dist / total


def grid_embedding(env: GridWorld, state: tuple[int, int],
                   model: LatentTaskModel,
                   rng: np.random.Generator) -> np.ndarray:
    """Embedding of a grid state through the latent task model."""
    return model.embed(env.progress(state), rng)


@dataclass
class ViewpointModel:
    """Additive camera offsets switched every `switch_period` steps."""

    view_offsets: list[np.ndarray]
    switch_period: int = 5
    seed: int = 0

    def __post_init__(self):
        if not self.view_offsets:
            raise EmptyOffsetsError("need at least one view offset")
        self.view_offsets = [as_vector(o) for o in self.view_offsets]
        dims = {o.size for o in self.view_offsets}
        if len(dims) != 1:
            raise BadDimensionError("view offsets must share a dimension")
        if self.switch_period < 1:
            raise ValueError("switch_period must be positive")

    def offsets_for(self, T: int) -> list[np.ndarray]:
        """Per-step offsets: one uniform draw per switch_period block."""
        rng = np.random.default_rng(self.seed)
        out = []
        current = None
        for t in range(T):
            if t % self.switch_period == 0 or current is None:
                current = self.view_offsets[rng.integers(len(self.view_offsets))]
            out.append(current)
        return out


def viewpoint_shift(trajectory: Sequence[tuple[float, np.ndarray]],
                    vm: ViewpointModel) -> list[tuple[float, np.ndarray]]:
    """Add a (seeded) per-block camera offset to every embedding."""
    offsets = vm.offsets_for(len(trajectory))
    return [(lam, e + off) for (lam, e), off in zip(trajectory, offsets)]
