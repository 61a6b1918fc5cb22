"""
Position filter over the last successful detections.

Each detection carries a position, a confidence q, a timestamp and the
detected object axis. Entries are weighted by q / age. The estimate is the
weighted mean position after dropping the j entries whose removal leaves the
lowest quality value, where quality is the weighted mean distance to the
estimate times the recency mass (sum of 1/age) divided by alpha.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass

import numpy as np

from apps.geometry.transforms import vec3

logger = logging.getLogger(__name__)

RECENCY_AND_DISPERSION = 'recency_and_dispersion'
QUALITY_ABOVE = 'quality_above'
QUALITY_BELOW = 'quality_below'
CONVERGENCE_RULES = (RECENCY_AND_DISPERSION, QUALITY_ABOVE, QUALITY_BELOW)

BATCH = 'batch'
GREEDY = 'greedy'
REMOVAL_MODES = (BATCH, GREEDY)


class NonMonotoneTimestamp(ValueError):
    pass


class InsufficientData(RuntimeError):
    pass


@dataclass(frozen=True)
class FilterParams:
    window: int = 10
    outlier_count: int = 2
    alpha: float = 10.0
    dispersion_max: float = 0.02
    quality_threshold: float = 0.0
    convergence_rule: str = RECENCY_AND_DISPERSION
    removal_mode: str = BATCH

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if not 0 <= self.outlier_count < self.window:
            raise ValueError("outlier_count must satisfy 0 <= j < window")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.convergence_rule not in CONVERGENCE_RULES:
            raise ValueError(f"Unknown convergence rule {self.convergence_rule!r}")
        if self.removal_mode not in REMOVAL_MODES:
            raise ValueError(f"Unknown removal mode {self.removal_mode!r}")


@dataclass(frozen=True, eq=False)
class FilterEntry:
    h: np.ndarray
    q: float
    t: float
    a: np.ndarray

    def __post_init__(self):
        if self.q <= 0:
            raise ValueError(f"Confidence must be positive, got {self.q}")
        axis = vec3(self.a)
        norm = np.linalg.norm(axis)
        if norm == 0:
            raise ValueError("Axis cannot be zero")
        object.__setattr__(self, 'h', vec3(self.h))
        object.__setattr__(self, 'a', axis / norm)
        object.__setattr__(self, 'q', float(self.q))
        object.__setattr__(self, 't', float(self.t))


@dataclass(frozen=True, eq=False)
class FilterEstimate:
    position: np.ndarray
    quality: float
    axis: np.ndarray
    dispersion: float
    recency_mass: float
    kept: tuple


def _ages(entries, now):
    ages = np.array([now - e.t for e in entries])
    if np.any(ages <= 0):
        raise ValueError(f"Evaluation time {now} must be later than every entry")
    return ages


def weighted_position(entries, now):
    b = np.array([e.q for e in entries]) / _ages(entries, now)
    h = np.vstack([e.h for e in entries])
    return b @ h / b.sum()


def dispersion(entries, now):
    b = np.array([e.q for e in entries]) / _ages(entries, now)
    h = np.vstack([e.h for e in entries])
    center = b @ h / b.sum()
    return float(b @ np.linalg.norm(h - center, axis=1) / b.sum())


def recency_mass(entries, now):
    return float((1.0 / _ages(entries, now)).sum())


def quality(entries, now, alpha):
    return dispersion(entries, now) * recency_mass(entries, now) / alpha


def combined_axis(entries, now):
    """Weighted mean of direction-less axes, each flipped to agree with the running mean."""
    b = np.array([e.q for e in entries]) / _ages(entries, now)
    order = np.argsort(-b, kind='stable')
    total = np.zeros(3)
    for i in order:
        a = entries[i].a
        if total.any() and a @ total < 0:
            a = -a
        total = total + b[i] * a
    norm = np.linalg.norm(total)
    return total / norm if norm > 0 else entries[order[0]].a.copy()


def leave_one_out(entries, now, alpha):
    """Q(F minus e_i) for every i; the value for a one-entry filter is 0."""
    if len(entries) == 1:
        return np.zeros(1)
    return np.array([
        quality(entries[:i] + entries[i + 1:], now, alpha) for i in range(len(entries))
    ])


class PositionFilter:
    """Ring buffer of the last ``window`` detections."""

    def __init__(self, params: FilterParams | None = None):
        self.params = params or FilterParams()
        self._entries: deque[FilterEntry] = deque(maxlen=self.params.window)

    def __len__(self):
        return len(self._entries)

    @property
    def entries(self):
        return tuple(self._entries)

    def clear(self):
        self._entries.clear()

    def push(self, entry: FilterEntry):
        if self._entries and entry.t < self._entries[-1].t:
            raise NonMonotoneTimestamp(
                f"Entry at t={entry.t} is older than the newest entry (t={self._entries[-1].t})"
            )
        self._entries.append(entry)

    def weights(self, now):
        """b_i = q_i / (now - t_i)."""
        entries = self.entries
        return [e.q / age for e, age in zip(entries, _ages(entries, now))]

    def _kept(self, entries, now):
        j = self.params.outlier_count
        if len(entries) <= j or j == 0:
            return entries
        if self.params.removal_mode == BATCH:
            scores = leave_one_out(entries, now, self.params.alpha)
            drop = set(np.argsort(scores, kind='stable')[:j].tolist())
            return tuple(e for i, e in enumerate(entries) if i not in drop)
        kept = list(entries)
        for _ in range(j):
            scores = leave_one_out(tuple(kept), now, self.params.alpha)
            kept.pop(int(np.argmin(scores)))
        return tuple(kept)

    def estimate(self, now) -> FilterEstimate:
        """
        Raises:
            InsufficientData: if the filter is empty
        """
        entries = self.entries
        if not entries:
            raise InsufficientData("No detections in the filter")
        kept = self._kept(entries, now)
        spread = dispersion(kept, now)
        mass = recency_mass(kept, now)
        return FilterEstimate(
            position=weighted_position(kept, now),
            quality=spread * mass / self.params.alpha,
            axis=combined_axis(kept, now),
            dispersion=spread,
            recency_mass=mass,
            kept=kept,
        )

    def converged(self, now):
        if len(self._entries) <= self.params.outlier_count or not self._entries:
            return False
        est = self.estimate(now)
        rule = self.params.convergence_rule
        if rule == RECENCY_AND_DISPERSION:
            return est.recency_mass >= self.params.alpha and est.dispersion <= self.params.dispersion_max
        if rule == QUALITY_ABOVE:
            return est.quality > self.params.quality_threshold
        return est.quality < self.params.quality_threshold
