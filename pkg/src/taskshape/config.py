"""Run configuration: one JSON document per run, strict parsing.

An empty config reproduces the published defaults (alpha 0.8, rho 0.05,
kappa 100, m 0.97, transition threshold 0.997, patience 4). Unknown keys
and out-of-range values abort before any computation.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

from .errors import ConfigError


@dataclass
class RunConfig:
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    alpha: float = 0.8
    rho: float = 0.05
    kappa: float = 100.0
    m: float = 0.97
    transition_threshold: float = 0.997
    patience: int = 4
    gamma: float = 0.99
    calibration_steps: int = 10_000
    filter_kind: str = "sigmoid"
    ema_beta: float = 0.9
    ema_band: float = 0.01
    kalman_q: float = 1e-4
    kalman_r: float = 1e-2
    grid_size: int = 20
    max_steps: int = 250
    episodes: int = 600
    grid_calibration_steps: int = 600
    noise_sigma: float = 0.1
    embed_dim: int = 64
    trajectory_steps: int = 1000
    dataset_path: str | None = None
    manifest_path: str | None = None
    output_dir: str = "."

    def __post_init__(self):
        checks = [
            (0.0 <= self.alpha <= 1.0, "alpha must lie in [0, 1]"),
            (self.rho >= 0, "rho must be nonnegative"),
            (self.kappa > 0, "kappa must be positive"),
            (0.0 < self.m < 1.0, "m must lie in (0, 1)"),
            (self.patience >= 1, "patience must be positive"),
            (0.0 <= self.gamma < 1.0, "gamma must lie in [0, 1)"),
            (self.calibration_steps >= 1, "calibration_steps must be positive"),
            (self.filter_kind in ("sigmoid", "ema", "kalman"),
             "filter_kind must be sigmoid, ema, or kalman"),
            (0.0 <= self.ema_beta < 1.0, "ema_beta must lie in [0, 1)"),
            (self.ema_band >= 0, "ema_band must be nonnegative"),
            (self.kalman_q >= 0 and self.kalman_r >= 0,
             "kalman variances must be nonnegative"),
            (self.grid_size >= 2, "grid_size must be >= 2"),
            (self.max_steps >= 1, "max_steps must be positive"),
            (self.episodes >= 0, "episodes must be nonnegative"),
            (self.noise_sigma >= 0, "noise_sigma must be nonnegative"),
            (self.embed_dim >= 2, "embed_dim must be >= 2"),
            (self.trajectory_steps >= 2, "trajectory_steps must be >= 2"),
            (bool(self.seeds), "seeds must be non-empty"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config document must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return asdict(self)
