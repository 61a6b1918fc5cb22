"""
Low-accuracy arm.

The arm reports the commanded pose; it actually sits at the command plus a
per-trial systematic offset plus per-command jitter.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from apps.geometry.transforms import vec3

logger = logging.getLogger(__name__)


def random_direction(rng):
    v = rng.standard_normal(3)
    return v / np.linalg.norm(v)


def sample_offset(rng, radius):
    """Uniform in the ball of ``radius``."""
    return random_direction(rng) * radius * rng.random() ** (1 / 3)


def sample_model_error(rng, length):
    if length == 0:
        return np.zeros(3)
    return random_direction(rng) * length


def step_toward(current, target, max_step):
    current, target = vec3(current), vec3(target)
    delta = target - current
    distance = np.linalg.norm(delta)
    if distance <= max_step:
        return target
    return current + delta * (max_step / distance)


@dataclass
class ArmModel:
    offset: np.ndarray
    jitter_sigma: float
    rng: np.random.Generator

    def actual(self, commanded):
        return vec3(commanded) + self.offset + self.rng.normal(0.0, self.jitter_sigma, 3)
