"""
Finger search spaces.

The gripper frame has its origin at the palm centre, the closing axis along
x, the finger thickness along y and the fingers extending down -z. A finger
space is the nominal finger volume grown by the accepted arm error on every
side; its projection in the image bounds the pixels searched for that finger.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import cv2
import numpy as np

from apps.geometry.camera import CameraModel, project_points
from apps.geometry.transforms import RigidTransform

logger = logging.getLogger(__name__)

LEFT = -1
RIGHT = 1
SIDES = (LEFT, RIGHT)


class NoVisibleRegion(ValueError):
    """The finger space does not project into the image."""


@dataclass(frozen=True)
class GripperGeometry:
    gripper_width: float = 0.085
    finger_width: float = 0.015
    finger_thickness: float = 0.02
    finger_length: float = 0.07
    arm_error_margin: float = 0.035

    def __post_init__(self):
        for name in ('gripper_width', 'finger_width', 'finger_thickness', 'finger_length'):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.arm_error_margin < 0:
            raise ValueError("arm_error_margin cannot be negative")

    def grasp_center(self):
        """Point between the fingers, half way along them (gripper frame)."""
        return np.array([0.0, 0.0, -self.finger_length / 2])

    def finger_center(self, side):
        return np.array([side * self.gripper_width / 2, 0.0, -self.finger_length / 2])


@dataclass(frozen=True, eq=False)
class FingerSpace:
    side: int
    lower: np.ndarray
    upper: np.ndarray

    def contains(self, points):
        points = np.atleast_2d(points)
        return np.all((points >= self.lower) & (points <= self.upper), axis=1)

    def corners(self):
        bounds = np.vstack([self.lower, self.upper])
        return np.array([
            [bounds[i, 0], bounds[j, 1], bounds[k, 2]]
            for i in (0, 1) for j in (0, 1) for k in (0, 1)
        ])

    def encloses(self, other: FingerSpace):
        return bool(np.all(self.lower <= other.lower) and np.all(self.upper >= other.upper))


def finger_space(geom: GripperGeometry, side) -> FingerSpace:
    if side not in SIDES:
        raise ValueError(f"side must be -1 or +1, got {side}")
    eps = geom.arm_error_margin
    lower = np.array([
        (side * geom.gripper_width - geom.finger_width) / 2 - eps,
        -geom.finger_thickness / 2 - eps,
        -geom.finger_length - eps,
    ])
    upper = np.array([
        (side * geom.gripper_width + geom.finger_width) / 2 + eps,
        geom.finger_thickness / 2 + eps,
        eps,
    ])
    return FingerSpace(side, lower, upper)


@dataclass(frozen=True, eq=False)
class FingerRegion:
    """Image rectangle (inclusive bounds) and convex polygon of a projected finger space."""
    row_min: int
    col_min: int
    row_max: int
    col_max: int
    polygon: np.ndarray

    @property
    def shape(self):
        return (self.row_max - self.row_min + 1, self.col_max - self.col_min + 1)

    @property
    def pixel_count(self):
        return self.shape[0] * self.shape[1]

    def window(self, image):
        return image[self.row_min:self.row_max + 1, self.col_min:self.col_max + 1]

    def polygon_mask(self):
        """Boolean mask of the polygon over the rectangle."""
        canvas = np.zeros(self.shape, dtype=np.uint8)
        local = np.clip(np.rint(self.polygon - [self.col_min, self.row_min]), -1e5, 1e5).astype(np.int32)
        cv2.fillConvexPoly(canvas, local, 1)
        return canvas.astype(bool)

    def union(self, other: FingerRegion):
        return (
            min(self.row_min, other.row_min), min(self.col_min, other.col_min),
            max(self.row_max, other.row_max), max(self.col_max, other.col_max),
        )


def roi_from_space(space: FingerSpace, gripper_pose: RigidTransform, cam: CameraModel) -> FingerRegion:
    """
    Raises:
        NoVisibleRegion: if every corner is behind the camera or the
            rectangle falls outside the image
    """
    rows, cols, _, in_front = project_points(cam, gripper_pose.apply(space.corners()))
    if not in_front.any():
        raise NoVisibleRegion(f"Finger space {space.side:+d} is behind the camera")
    points = np.column_stack([cols[in_front], rows[in_front]]).astype(np.float32)
    hull = cv2.convexHull(points).reshape(-1, 2).astype(float)

    col_min = max(int(np.floor(hull[:, 0].min())), 0)
    col_max = min(int(np.ceil(hull[:, 0].max())), cam.width - 1)
    row_min = max(int(np.floor(hull[:, 1].min())), 0)
    row_max = min(int(np.ceil(hull[:, 1].max())), cam.height - 1)
    if col_min > col_max or row_min > row_max:
        raise NoVisibleRegion(f"Finger space {space.side:+d} projects outside the image")
    return FingerRegion(row_min, col_min, row_max, col_max, hull)
