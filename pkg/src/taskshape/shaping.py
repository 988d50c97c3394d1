"""Confidence gating for raw similarity scores.

A calibrator buffers scores from the initial exploration phase and freezes a
noise-floor threshold at its m-quantile; scores are then squashed through a
steep logistic gate. EMA-with-hysteresis and a scalar Kalman filter are
provided as alternative smoothing paths.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InsufficientDataError, NonFiniteError

DEFAULT_CALIBRATION_STEPS = 10_000
DEFAULT_QUANTILE = 0.97
DEFAULT_KAPPA = 100.0


def _check_finite(x: float, name: str = "score") -> float:
    x = float(x)
    if not math.isfinite(x):
        raise NonFiniteError(f"{name} must be finite, got {x!r}")
    return x


class NoiseCalibrator:
    """Bounded buffer of early raw scores producing the m-quantile threshold.

    Observations after the buffer reaches capacity are ignored: calibration
    is one-shot and the threshold is constant for the rest of the run.
    """

    def __init__(self, calibration_steps: int = DEFAULT_CALIBRATION_STEPS,
                 m: float = DEFAULT_QUANTILE):
        if calibration_steps < 1:
            raise ValueError("calibration_steps must be positive")
        if not (0.0 < m < 1.0):
            raise ValueError(f"quantile level m must lie in (0, 1), got {m}")
        self.calibration_steps = int(calibration_steps)
        self.m = float(m)
        self._buffer: list[float] = []

    def __len__(self) -> int:
        return len(self._buffer)

    @property
    def calibrating(self) -> bool:
        return len(self._buffer) < self.calibration_steps

    def observe(self, score: float) -> None:
        score = _check_finite(score)
        if self.calibrating:
            self._buffer.append(score)

    def threshold(self) -> float:
        """Empirical m-quantile (linear interpolation between order statistics)."""
        if len(self._buffer) < 2:
            raise InsufficientDataError(
                f"need >= 2 observations, have {len(self._buffer)}")
        return float(np.quantile(np.asarray(self._buffer), self.m))


@dataclass(frozen=True)
class GateConfig:
    """Logistic gate parameters: steepness kappa and threshold theta."""

    theta: float
    kappa: float = DEFAULT_KAPPA

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")


def gate(score: float, cfg: GateConfig) -> float:
    """sigma(kappa * (score - theta)), computed without overflow."""
    score = _check_finite(score)
    z = cfg.kappa * (score - cfg.theta)
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


@dataclass(frozen=True)
class EmaHysteresisState:
    """Exponentially smoothed score with a two-threshold pass/block latch.

    The latch arms once the smoothed value exceeds theta + band and releases
    only when it falls below theta - band.
    """

    value: float = 0.0
    beta: float = 0.9
    band: float = 0.01
    armed: bool = False

    def __post_init__(self):
        if not (0.0 <= self.beta < 1.0):
            raise ValueError(f"beta must lie in [0, 1), got {self.beta}")
        if self.band < 0:
            raise ValueError("hysteresis band must be nonnegative")


def ema_step(state: EmaHysteresisState, score: float,
             theta: float) -> tuple[float, EmaHysteresisState]:
    """Advance the EMA and the hysteresis latch; returns the smoothed value."""
    score = _check_finite(score)
    y = state.beta * state.value + (1.0 - state.beta) * score
    armed = state.armed
    if y > theta + state.band:
        armed = True
    elif y < theta - state.band:
        armed = False
    return y, replace(state, value=y, armed=armed)


@dataclass(frozen=True)
class Kalman1DState:
    """Scalar random-walk Kalman filter state (posterior mean and variance)."""

    mean: float = 0.0
    var: float = 1.0
    process_var: float = 1e-4
    measurement_var: float = 1e-2

    def __post_init__(self):
        if self.var <= 0:
            raise ValueError("variance must stay positive")
        if self.process_var < 0 or self.measurement_var < 0:
            raise ValueError("noise variances must be nonnegative")


def kalman_step(state: Kalman1DState, score: float) -> tuple[float, Kalman1DState]:
    """Predict-update cycle of the scalar random-walk model."""
    score = _check_finite(score)
    var_prior = state.var + state.process_var
    k = var_prior / (var_prior + state.measurement_var)
    mean = state.mean + k * (score - state.mean)
    var = (1.0 - k) * var_prior
    # keep the posterior variance strictly positive even when r == 0
    var = max(var, 1e-300)
    return mean, replace(state, mean=mean, var=var)


class RewardShaper:
    """Full calibrate-then-gate pipeline around a raw similarity stream.

    While the calibrator is still filling, every raw score is recorded and
    the emitted reward is 0. Once frozen, the score is routed through the
    selected filter:

    - ``sigmoid``: plain logistic gate on the raw score.
    - ``ema``: exponential smoothing; the smoothed value is emitted while
      the hysteresis latch is armed, else 0.
    - ``kalman``: logistic gate applied to the Kalman posterior mean.
    """

    KINDS = ("sigmoid", "ema", "kalman")

    def __init__(self, kind: str = "sigmoid",
                 calibration_steps: int = DEFAULT_CALIBRATION_STEPS,
                 m: float = DEFAULT_QUANTILE,
                 kappa: float = DEFAULT_KAPPA,
                 ema_beta: float = 0.9, ema_band: float = 0.01,
                 kalman_q: float = 1e-4, kalman_r: float = 1e-2,
                 theta_override: float | None = None):
        if kind not in self.KINDS:
            raise ValueError(f"unknown filter kind {kind!r}")
        self.kind = kind
        self.kappa = float(kappa)
        self.calibrator = NoiseCalibrator(calibration_steps, m)
        self.ema = EmaHysteresisState(beta=ema_beta, band=ema_band)
        self.kalman = Kalman1DState(process_var=kalman_q, measurement_var=kalman_r)
        self._theta: float | None = theta_override

    @property
    def theta(self) -> float | None:
        """Frozen threshold, or None while still calibrating."""
        if self._theta is None and not self.calibrator.calibrating:
            self._theta = self.calibrator.threshold()
        return self._theta

    @property
    def calibrating(self) -> bool:
        return self._theta is None and self.calibrator.calibrating

    def shape(self, raw_score: float) -> float:
        raw_score = _check_finite(raw_score, "raw score")
        if self.calibrating:
            self.calibrator.observe(raw_score)
            return 0.0
        theta = self.theta
        assert theta is not None
        if self.kind == "sigmoid":
            return gate(raw_score, GateConfig(theta=theta, kappa=self.kappa))
        if self.kind == "ema":
            smoothed, self.ema = ema_step(self.ema, raw_score, theta)
            return smoothed if self.ema.armed else 0.0
        filtered, self.kalman = kalman_step(self.kalman, raw_score)
        return gate(filtered, GateConfig(theta=theta, kappa=self.kappa))
