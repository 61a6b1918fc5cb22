"""
Pinhole camera on a pan-tilt mount.

The camera frame looks along its own +z, image columns grow along +x and
rows along +y. ``pose`` is the mount pose in the world; pan turns about the
mount z axis, then tilt about the rotated x axis. At zero pan and tilt the
optical axis is the mount's +y and image rows point down the mount's -z.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .transforms import RigidTransform, compose, rot_x, rot_z, vec3

logger = logging.getLogger(__name__)

# Columns are the optical x, y, z axes expressed in the mount frame.
OPTICAL_IN_MOUNT = RigidTransform(np.array([
    [1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.0, -1.0, 0.0],
]))


class BehindCamera(ValueError):
    """The point has a non-positive depth in the camera frame."""


class InvalidDepth(ValueError):
    """A depth of zero (no sensor return) cannot be back-projected."""


class PixelCoord(NamedTuple):
    row: int
    col: int


@dataclass(frozen=True)
class CameraModel:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    pose: RigidTransform = field(default_factory=RigidTransform.identity)
    pan: float = 0.0
    tilt: float = 0.0

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("Focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("Principal point must lie inside the image")

    @property
    def shape(self):
        return (self.height, self.width)

    def world_from_camera(self):
        pan_tilt = RigidTransform(rot_z(self.pan) @ rot_x(self.tilt))
        return compose(compose(self.pose, pan_tilt), OPTICAL_IN_MOUNT)

    def camera_from_world(self):
        return self.world_from_camera().inverse()

    @property
    def position(self):
        return self.pose.translation

    def shifted(self, offset):
        """Same camera with the mount translated by ``offset`` (world frame)."""
        pose = RigidTransform(self.pose.rotation, self.pose.translation + vec3(offset))
        return replace(self, pose=pose)

    def aimed_at(self, point):
        """Return a copy whose pan/tilt put ``point`` on the optical axis."""
        d = self.pose.inverse().apply(vec3(point))
        pan = float(np.arctan2(-d[0], d[1]))
        tilt = float(np.arctan2(d[2], np.hypot(d[0], d[1])))
        return replace(self, pan=pan, tilt=tilt)

    def intrinsics(self):
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])


def project(cam: CameraModel, p_world) -> PixelCoord:
    """
    Project a world point to the nearest pixel.

    Raises:
        BehindCamera: if the camera-frame depth is not positive
    """
    p_cam = cam.camera_from_world().apply(vec3(p_world))
    if p_cam[2] <= 0:
        raise BehindCamera(f"Point {p_world} is behind the camera (z={p_cam[2]:.4f})")
    col = cam.cx + cam.fx * p_cam[0] / p_cam[2]
    row = cam.cy + cam.fy * p_cam[1] / p_cam[2]
    return PixelCoord(int(np.rint(row)), int(np.rint(col)))


def project_points(cam: CameraModel, points):
    """
    Vectorised projection.

    Returns:
        tuple: (rows, cols, depth_m, in_front) float arrays; rows/cols are NaN
        where the point is behind the camera
    """
    p_cam = cam.camera_from_world().apply(np.atleast_2d(points))
    z = p_cam[:, 2]
    in_front = z > 0
    safe_z = np.where(in_front, z, 1.0)
    cols = np.where(in_front, cam.cx + cam.fx * p_cam[:, 0] / safe_z, np.nan)
    rows = np.where(in_front, cam.cy + cam.fy * p_cam[:, 1] / safe_z, np.nan)
    return rows, cols, z, in_front


def back_project(cam: CameraModel, px: PixelCoord, depth_mm: int):
    """
    World point seen at ``px`` with camera-frame depth ``depth_mm``.

    Raises:
        InvalidDepth: if depth_mm is not positive
    """
    if depth_mm <= 0:
        raise InvalidDepth(f"Invalid depth {depth_mm} mm at {px}")
    z = depth_mm / 1000.0
    x = (px.col - cam.cx) * z / cam.fx
    y = (px.row - cam.cy) * z / cam.fy
    return cam.world_from_camera().apply(np.array([x, y, z]))


def back_project_pixels(cam: CameraModel, rows, cols, depth_mm):
    """Vectorised back-projection; every depth must be positive."""
    depth_mm = np.asarray(depth_mm, dtype=float)
    if np.any(depth_mm <= 0):
        raise InvalidDepth("Cannot back-project pixels without depth")
    z = depth_mm / 1000.0
    x = (np.asarray(cols, dtype=float) - cam.cx) * z / cam.fx
    y = (np.asarray(rows, dtype=float) - cam.cy) * z / cam.fy
    return cam.world_from_camera().apply(np.column_stack([x, y, z]))


def pixel_rays(cam: CameraModel, rows, cols):
    """World-frame ray directions scaled so their camera-frame z is 1."""
    x = (np.asarray(cols, dtype=float) - cam.cx) / cam.fx
    y = (np.asarray(rows, dtype=float) - cam.cy) / cam.fy
    directions = np.column_stack([x, y, np.ones_like(x)])
    return cam.world_from_camera().apply_rotation(directions)
