"""
Rigid-body transforms in a right-handed, z-up world frame.

Points are numpy arrays of shape (3,) or (N, 3) in meters.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

ORTHONORMAL_TOL = 1e-9


class InvalidTransform(ValueError):
    """Raised when a rotation is not orthonormal with det +1."""


def vec3(x, y=None, z=None):
    """Build a finite 3-vector from three scalars or one sequence."""
    if y is None and z is None:
        v = np.asarray(x, dtype=float).reshape(3)
    else:
        v = np.array([x, y, z], dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"Non-finite vector: {v}")
    return v


def unit(v):
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise ValueError("Cannot normalise a zero vector")
    return v / norm


def rot_x(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _frozen(array):
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class RigidTransform:
    """
    Rotation followed by translation: p' = R p + t.

    Instances are immutable; the arrays are read-only.
    """
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        rotation = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        translation = vec3(self.translation)
        if not np.allclose(rotation.T @ rotation, np.eye(3), atol=ORTHONORMAL_TOL, rtol=0.0):
            raise InvalidTransform("Rotation is not orthonormal")
        if abs(np.linalg.det(rotation) - 1.0) > ORTHONORMAL_TOL:
            raise InvalidTransform("Rotation determinant is not +1")
        object.__setattr__(self, 'rotation', _frozen(rotation))
        object.__setattr__(self, 'translation', _frozen(translation))

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def from_translation(cls, x, y=None, z=None):
        return cls(np.eye(3), vec3(x, y, z))

    @classmethod
    def from_matrix(cls, matrix):
        matrix = np.asarray(matrix, dtype=float)
        return cls(matrix[:3, :3], matrix[:3, 3])

    def as_matrix(self):
        matrix = np.eye(4)
        matrix[:3, :3] = self.rotation
        matrix[:3, 3] = self.translation
        return matrix

    def apply(self, points):
        """Map (3,) or (N, 3) points through the transform."""
        points = np.asarray(points, dtype=float)
        return points @ self.rotation.T + self.translation

    def apply_rotation(self, vectors):
        return np.asarray(vectors, dtype=float) @ self.rotation.T

    def inverse(self):
        r_inv = self.rotation.T
        return RigidTransform(r_inv, -r_inv @ self.translation)

    def orthonormalized(self):
        """Project the rotation back onto SO(3) after long composition chains."""
        u, _, vt = np.linalg.svd(self.rotation)
        rotation = u @ vt
        if np.linalg.det(rotation) < 0:
            u[:, -1] *= -1
            rotation = u @ vt
        return RigidTransform(rotation, self.translation)

    def __matmul__(self, other):
        return compose(self, other)


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Transform that applies ``b`` first, then ``a``."""
    return RigidTransform(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)
