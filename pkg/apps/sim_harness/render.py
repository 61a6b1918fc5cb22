"""
Ray-cast RGB-D renderer.

Every pixel of the (optional) window casts one ray from the true camera.
Depth is the camera-frame z of the nearest hit, so the ray parameter with
``pixel_rays`` directions is the depth itself. Rays that hit nothing within
the sensor range read 0.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import cv2
import numpy as np

from apps.depth_seg.images import MAX_DEPTH_MM, ColorImage, DepthImage
from apps.geometry.camera import CameraModel, pixel_rays
from apps.gripper_track.spaces import LEFT, RIGHT, finger_space

from .scene import FINGER_LABELS, FLOOR, NOTHING, OBJECT_LABEL_BASE, TABLE, World, object_label
from .texture import VisibleAnchors, visible_anchors

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RayHits:
    """Noiseless ray-cast result. Arrays are full image size; pixels outside the window are empty."""
    depth_m: np.ndarray
    labels: np.ndarray
    window: tuple

    @property
    def hit(self):
        return self.labels != NOTHING


@dataclass(frozen=True, eq=False)
class Frame:
    color: ColorImage
    depth: DepthImage
    labels: np.ndarray
    anchors: VisibleAnchors | None
    time: float = 0.0

    def object_mask(self, index=0):
        return self.labels == object_label(index)


def full_window(cam: CameraModel):
    return (0, 0, cam.height - 1, cam.width - 1)


def _plane_hits(origin, directions, height):
    with np.errstate(divide='ignore', invalid='ignore'):
        t = (height - origin[2]) / directions[:, 2]
    return np.where(t > 0, t, np.inf)


def _cylinder_hits(origin, directions, obj):
    r = obj.spec.radius
    o = origin[:2] - np.array([obj.x, obj.y])
    d = directions[:, :2]
    a = (d ** 2).sum(axis=1)
    b = 2 * d @ o
    c = o @ o - r ** 2
    disc = b ** 2 - 4 * a * c
    with np.errstate(divide='ignore', invalid='ignore'):
        side = (-b - np.sqrt(np.where(disc >= 0, disc, np.nan))) / (2 * a)
    z = origin[2] + side * directions[:, 2]
    side = np.where((disc >= 0) & (side > 0) & (z >= obj.base_z) & (z <= obj.top_z), side, np.inf)

    top = _plane_hits(origin, directions, obj.top_z)
    with np.errstate(invalid='ignore'):
        p = origin[:2] + top[:, None] * d
    on_cap = np.isfinite(top) & (((p - [obj.x, obj.y]) ** 2).sum(axis=1) <= r ** 2)
    return np.minimum(side, np.where(on_cap, top, np.inf))


def _box_hits(origin, directions, pose, lower, upper):
    inv = pose.inverse()
    o = inv.apply(origin)
    d = inv.apply_rotation(directions)
    with np.errstate(divide='ignore', invalid='ignore'):
        t1 = (lower - o) / d
        t2 = (upper - o) / d
    t_near = np.nanmax(np.minimum(t1, t2), axis=1)
    t_far = np.nanmin(np.maximum(t1, t2), axis=1)
    return np.where((t_far >= t_near) & (t_near > 0), t_near, np.inf)


def raycast(world: World, cam: CameraModel, window=None, scenery=True) -> RayHits:
    """
    Args:
        window: (row_min, col_min, row_max, col_max) inclusive; whole image by default
        scenery: when False only the gripper fingers are cast
    """
    config = world.config
    window = window or full_window(cam)
    r0, c0, r1, c1 = window
    rows, cols = np.mgrid[r0:r1 + 1, c0:c1 + 1]
    origin = cam.world_from_camera().translation
    directions = pixel_rays(cam, rows.ravel(), cols.ravel())

    best = np.full(rows.size, np.inf)
    labels = np.zeros(rows.size, dtype=np.int16)

    def keep(t, label):
        closer = t < best
        best[closer] = t[closer]
        labels[closer] = label

    if scenery:
        keep(_plane_hits(origin, directions, 0.0), FLOOR)
        table = _plane_hits(origin, directions, config.table_height)
        with np.errstate(invalid='ignore'):
            xy = origin[:2] + table[:, None] * directions[:, :2]
        on_table = (
            (xy[:, 0] >= config.table_x_min) & (xy[:, 0] <= config.table_x_max)
            & (xy[:, 1] >= config.table_y_min) & (xy[:, 1] <= config.table_y_max)
        )
        keep(np.where(on_table, table, np.inf), TABLE)
        for index, obj in enumerate(world.objects):
            keep(_cylinder_hits(origin, directions, obj), object_label(index))

    if world.gripper_pose is not None:
        nominal = replace(world.geometry, arm_error_margin=0.0)
        for side in (LEFT, RIGHT):
            box = finger_space(nominal, side)
            keep(_box_hits(origin, directions, world.gripper_pose, box.lower, box.upper), FINGER_LABELS[side])

    out_of_range = best > config.max_range
    best[out_of_range] = np.inf
    labels[out_of_range] = NOTHING

    depth = np.full(cam.shape, np.inf)
    label_image = np.zeros(cam.shape, dtype=np.int16)
    depth[r0:r1 + 1, c0:c1 + 1] = best.reshape(rows.shape)
    label_image[r0:r1 + 1, c0:c1 + 1] = labels.reshape(rows.shape)
    return RayHits(depth, label_image, window)


def depth_noise(shape, config, rng):
    """Spatially correlated noise plus white noise, in millimetres."""
    correlated = np.zeros(shape)
    if config.depth_noise_correlated_mm > 0:
        blurred = cv2.GaussianBlur(rng.standard_normal(shape), (0, 0), config.depth_noise_blur_px)
        spread = blurred.std()
        if spread > 0:
            correlated = blurred / spread * config.depth_noise_correlated_mm
    return correlated + config.depth_noise_white_mm * rng.standard_normal(shape)


def colorize(world: World, hits: RayHits):
    config = world.config
    color = np.empty(hits.labels.shape + (3,), dtype=np.uint8)
    color[:] = config.floor_color
    color[hits.labels == TABLE] = config.table_color
    color[hits.labels >= OBJECT_LABEL_BASE] = config.object_color
    for label in FINGER_LABELS.values():
        color[hits.labels == label] = config.finger_color
    return color


def render(world: World, cam: CameraModel, rng=None, window=None, hits: RayHits | None = None,
           texture=True, time=0.0) -> Frame:
    """
    Render one frame. Pass precomputed ``hits`` to re-render a static scene
    with fresh noise; without ``rng`` the depth is noiseless.
    """
    if hits is None:
        hits = raycast(world, cam, window)
    r0, c0, r1, c1 = hits.window
    depth_mm = np.zeros(cam.shape)
    inside = np.s_[r0:r1 + 1, c0:c1 + 1]
    depth_mm[inside] = hits.depth_m[inside] * 1000.0
    if rng is not None:
        depth_mm[inside] += depth_noise(depth_mm[inside].shape, world.config, rng)
    depth_mm = np.where(hits.hit, np.clip(np.rint(depth_mm), 1, MAX_DEPTH_MM - 1), 0)

    color = colorize(world, hits)
    anchors = None
    if texture and world.objects:
        anchors = visible_anchors(world, cam, hits)
        for row, col in zip(anchors.rows, anchors.cols):
            cv2.circle(color, (int(col), int(row)), 1, world.config.dot_color, -1)
    return Frame(ColorImage(color), DepthImage(depth_mm.astype(np.uint16)), hits.labels, anchors, time)
