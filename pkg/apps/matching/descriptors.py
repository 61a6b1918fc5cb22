"""
Keypoints and the descriptor-source interface.

Any feature extractor can feed the matcher as long as it yields Keypoint
objects with equal-length descriptors.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from apps.geometry.camera import PixelCoord


@dataclass(frozen=True, eq=False)
class Keypoint:
    px: PixelCoord
    descriptor: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        descriptor = np.asarray(self.descriptor, dtype=np.float64).reshape(-1)
        descriptor.setflags(write=False)
        object.__setattr__(self, 'descriptor', descriptor)
        object.__setattr__(self, 'px', PixelCoord(int(self.px[0]), int(self.px[1])))

    @property
    def length(self):
        return self.descriptor.size


class DescriptorSource(Protocol):
    def keypoints(self, frame) -> list[Keypoint]:
        ...


def descriptor_matrix(keypoints: Sequence[Keypoint]) -> np.ndarray:
    if not keypoints:
        return np.zeros((0, 0))
    return np.vstack([kp.descriptor for kp in keypoints])


def pixel_matrix(keypoints: Sequence[Keypoint]) -> np.ndarray:
    """(N, 2) array of (row, col)."""
    return np.array([kp.px for kp in keypoints], dtype=np.int64).reshape(-1, 2)
