"""
Probabilistic reference database.

Every reference carries a weight in [m, M] and the weights sum to one.
Each frame a small subset is drawn in proportion to the weights, and the
weights of the drawn references move toward M on a successful match and
toward m on a failed one. A normalization pass then spreads the surplus
or deficit over the remaining headroom, so the bounds always hold.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from apps.matching.descriptors import Keypoint

logger = logging.getLogger(__name__)

SUM_TOL = 1e-9


class InfeasibleBounds(ValueError):
    """n * m > 1 or n * M < 1: the weights cannot sum to one within the bounds."""


@dataclass(frozen=True)
class RefDbParams:
    weight_min: float | None = None
    weight_max: float | None = None
    gain_success: float = 0.3
    gain_failure: float = 0.04
    subset_size: int = 5

    def __post_init__(self):
        for name in ('gain_success', 'gain_failure'):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {value}")
        if self.subset_size < 1:
            raise ValueError("subset_size must be >= 1")
        if self.weight_min is not None and self.weight_min < 0:
            raise ValueError("weight_min cannot be negative")
        if self.weight_max is not None and self.weight_max <= 0:
            raise ValueError("weight_max must be positive")
        if None not in (self.weight_min, self.weight_max) and self.weight_min > self.weight_max:
            raise ValueError("weight_min cannot exceed weight_max")

    def bounds_for(self, n):
        """
        (m, M) for a database of n references.

        Unset bounds follow m = 0.25/n and M = max(0.25, 1/n). Configured
        bounds are used as given.

        Raises:
            InfeasibleBounds: if n * m > 1 or n * M < 1
        """
        if n < 1:
            raise ValueError(f"Database size must be >= 1, got {n}")
        m = 0.25 / n if self.weight_min is None else self.weight_min
        M = max(0.25, 1.0 / n) if self.weight_max is None else self.weight_max
        if n * m > 1.0 + SUM_TOL:
            raise InfeasibleBounds(f"{n} references cannot all weigh at least {m}")
        if n * M < 1.0 - SUM_TOL:
            raise InfeasibleBounds(f"{n} references cannot sum to one below {M}")
        return m, M


@dataclass(frozen=True, eq=False)
class Reference:
    id: int
    object_id: str
    keypoints: list = field(default_factory=list)

    def __str__(self):
        return f"ref {self.id} ({self.object_id}, {len(self.keypoints)} keypoints)"


class ReferenceDatabase:
    """
    References with ids 1..n and their weights.

    Single-writer: sampling and updates must not run concurrently.
    """

    def __init__(self, params: RefDbParams | None = None):
        self.params = params or RefDbParams()
        self._refs: list[Reference] = []
        self._weights = np.zeros(0)
        self.m = 0.0
        self.M = 1.0

    def __len__(self):
        return len(self._refs)

    def __iter__(self):
        return iter(self._refs)

    @property
    def weights(self):
        return self._weights.copy()

    def weight(self, ref_id):
        return float(self._weights[self._index(ref_id)])

    def get(self, ref_id) -> Reference:
        return self._refs[self._index(ref_id)]

    def object_ids(self):
        return sorted({ref.object_id for ref in self._refs})

    def references_for(self, object_id):
        return [ref for ref in self._refs if ref.object_id == object_id]

    def _index(self, ref_id):
        if not 1 <= ref_id <= len(self._refs):
            raise KeyError(f"No reference with id {ref_id}")
        return ref_id - 1

    def insert(self, object_id: str, keypoints: list[Keypoint]) -> int:
        """
        Add a reference with weight 1/(n+1); existing weights are scaled by n/(n+1).

        Raises:
            InfeasibleBounds: if the bounds cannot hold for n+1 references
        """
        object_id = str(object_id)
        if not object_id or any(ch.isspace() for ch in object_id):
            raise ValueError(f"Object id must be a non-empty token, got {object_id!r}")
        n = len(self._refs)
        m, M = self.params.bounds_for(n + 1)
        ref = Reference(id=n + 1, object_id=object_id, keypoints=list(keypoints))
        self._refs.append(ref)
        self.m, self.M = m, M
        z = np.append(self._weights * n / (n + 1), 1.0 / (n + 1))
        self._weights = self._normalized(np.clip(z, m, M))
        return ref.id

    def apply_params(self, params: RefDbParams):
        """
        Switch to new parameters and bring the weights inside their bounds.

        Builders insert under the automatic bounds and apply configured
        ones once the database has its final size.

        Raises:
            InfeasibleBounds: if the bounds cannot hold for the current size
        """
        if self._refs:
            self.m, self.M = params.bounds_for(len(self._refs))
            self._weights = self._normalized(np.clip(self._weights, self.m, self.M))
        self.params = params

    def reset_uniform(self):
        n = len(self._refs)
        if n:
            self._weights = np.full(n, 1.0 / n)

    def set_weights(self, weights):
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (len(self._refs),):
            raise ValueError(f"Expected {len(self._refs)} weights, got {weights.shape}")
        if abs(weights.sum() - 1.0) > SUM_TOL:
            raise ValueError(f"Weights sum to {weights.sum()}, not 1")
        if weights.min() < self.m - SUM_TOL or weights.max() > self.M + SUM_TOL:
            raise ValueError(f"Weights must lie in [{self.m}, {self.M}]")
        self._weights = weights.copy()

    def _pool(self, object_id):
        if object_id is None:
            return np.arange(1, len(self._refs) + 1), self._weights
        ids = np.array([ref.id for ref in self._refs if ref.object_id == object_id], dtype=int)
        if ids.size == 0:
            return ids, np.zeros(0)
        w = self._weights[ids - 1]
        return ids, w / w.sum()

    def interval_ids(self, uniforms, object_id=None):
        """Reference id whose cumulative-weight interval holds each uniform."""
        ids, w = self._pool(object_id)
        if ids.size == 0:
            return np.zeros(0, dtype=int)
        cumulative = np.cumsum(w)
        hits = np.searchsorted(cumulative, np.asarray(uniforms, dtype=float), side='right')
        return ids[np.clip(hits, 0, ids.size - 1)]

    def pick_from_uniforms(self, uniforms, object_id=None):
        """Distinct ids hit by the uniforms, ascending."""
        return sorted({int(i) for i in self.interval_ids(uniforms, object_id)})

    def sample_subset(self, count, rng, object_id=None):
        if count < 1:
            raise ValueError("count must be >= 1")
        return self.pick_from_uniforms(rng.random(count), object_id)

    def update(self, matched_ids, unmatched_ids):
        """Move matched weights toward M, unmatched toward m, then renormalize."""
        matched, unmatched = set(matched_ids), set(unmatched_ids)
        if matched & unmatched:
            raise ValueError(f"References both matched and unmatched: {sorted(matched & unmatched)}")
        z = self._weights.copy()
        for ref_id in matched:
            i = self._index(ref_id)
            z[i] += self.params.gain_success * (self.M - z[i])
        for ref_id in unmatched:
            i = self._index(ref_id)
            z[i] -= self.params.gain_failure * (z[i] - self.m)
        self._weights = self._normalized(z)

    def _normalized(self, z):
        delta = 1.0 - z.sum()
        if delta == 0.0:
            return z
        headroom = (self.M - z) if delta > 0 else (z - self.m)
        total = headroom.sum()
        if total <= 0.0:
            logger.warning(f"No headroom to absorb {delta:+.3g}; spreading it uniformly")
            w = z + delta / z.size
        else:
            w = z + headroom / total * delta
        return np.clip(w, self.m, self.M)

    def check_invariants(self):
        if not self._refs:
            return
        if abs(self._weights.sum() - 1.0) > SUM_TOL:
            raise AssertionError(f"Weights sum to {self._weights.sum()}")
        if self._weights.min() < self.m - SUM_TOL or self._weights.max() > self.M + SUM_TOL:
            raise AssertionError(f"Weights leave [{self.m}, {self.M}]")
