"""
Constant-velocity Kalman filter on the gripper position.

State is (position, velocity) in the world frame; measurements are positions.
A failed detection skips the update and inflates the covariance instead.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from apps.geometry.transforms import vec3

logger = logging.getLogger(__name__)

H = np.hstack([np.eye(3), np.zeros((3, 3))])


@dataclass(frozen=True)
class TrackerParams:
    process_noise: float = 0.01
    measurement_sigma: float = 0.005
    inflation: float = 2.0
    trace_threshold: float = 0.01
    black_threshold: int = 50
    min_finger_pixels: int = 30
    finger_distance_tol: float = 0.02
    gain: float = 1.0
    initial_sigma: float = 0.05

    def __post_init__(self):
        if self.process_noise < 0:
            raise ValueError("process_noise cannot be negative")
        if self.measurement_sigma <= 0 or self.initial_sigma <= 0:
            raise ValueError("Noise sigmas must be positive")
        if self.inflation <= 1.0:
            raise ValueError("inflation must be greater than 1")
        if not 0 < self.black_threshold <= 256:
            raise ValueError("black_threshold must be in (0, 256]")
        if self.min_finger_pixels < 1:
            raise ValueError("min_finger_pixels must be >= 1")


@dataclass(frozen=True, eq=False)
class TrackerState:
    mean: np.ndarray
    covariance: np.ndarray
    params: TrackerParams

    @classmethod
    def initial(cls, position, params: TrackerParams | None = None):
        params = params or TrackerParams()
        mean = np.concatenate([vec3(position), np.zeros(3)])
        return cls(mean, np.eye(6) * params.initial_sigma ** 2, params)

    @property
    def position(self):
        return self.mean[:3].copy()

    @property
    def velocity(self):
        return self.mean[3:].copy()

    @property
    def uncertainty(self):
        return float(np.trace(self.covariance))


def transition(dt):
    F = np.eye(6)
    F[:3, 3:] = dt * np.eye(3)
    return F


def process_covariance(dt, q):
    """White-acceleration noise integrated over one step."""
    I = np.eye(3)
    return q * np.block([
        [dt ** 3 / 3 * I, dt ** 2 / 2 * I],
        [dt ** 2 / 2 * I, dt * I],
    ])


def predict(state: TrackerState, dt):
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    F = transition(dt)
    mean = F @ state.mean
    covariance = F @ state.covariance @ F.T + process_covariance(dt, state.params.process_noise)
    return mean, covariance


def kalman_step(state: TrackerState, dt, measurement=None) -> TrackerState:
    """
    One predict step followed by a position update, or by covariance
    inflation when ``measurement`` is None.
    """
    params = state.params
    mean, P = predict(state, dt)

    if measurement is None:
        P = P * params.inflation
        logger.debug(f"Detection failure, trace now {np.trace(P):.5f}")
    else:
        z = vec3(measurement)
        R = np.eye(3) * params.measurement_sigma ** 2
        S = H @ P @ H.T + R
        K = np.linalg.solve(S, H @ P).T
        mean = mean + K @ (z - H @ mean)
        joseph = np.eye(6) - K @ H
        P = joseph @ P @ joseph.T + K @ R @ K.T

    P = (P + P.T) / 2
    return TrackerState(mean, P, params)
