"""
Finger detection inside a projected finger space.

Pixels of the ROI rectangle go through the cheap checks first: inside the
projected polygon, then black in every channel. Only the survivors are
back-projected and tested against the 3-D box in the gripper frame. The
largest 4-connected blob of what is left is the finger.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from apps.depth_seg.images import ColorImage, DepthImage
from apps.depth_seg.segmentation import floodfill
from apps.geometry.camera import CameraModel, back_project_pixels
from apps.geometry.transforms import RigidTransform, vec3

from .kalman import TrackerParams
from .spaces import FingerSpace, GripperGeometry, roi_from_space

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FingerDetection:
    side: int
    position: np.ndarray
    pixel_count: int
    stage_counts: dict


def _check_shapes(color, depth, cam):
    if color.shape[:2] != cam.shape or depth.shape != cam.shape:
        raise ValueError(
            f"Images {color.shape[:2]} / {depth.shape} do not match camera {cam.shape}"
        )


def detect_finger(
    color: ColorImage,
    depth: DepthImage,
    space: FingerSpace,
    gripper_pose: RigidTransform,
    cam: CameraModel,
    params: TrackerParams | None = None,
) -> FingerDetection | None:
    """
    Args:
        color: RGB frame
        depth: depth frame aligned with ``color``
        space: finger space in the gripper frame
        gripper_pose: model pose of the gripper (world from gripper)
        cam: camera that took the frame

    Returns:
        FingerDetection, or None when no blob reaches ``min_finger_pixels``

    Raises:
        NoVisibleRegion: if the space does not project into the image
    """
    params = params or TrackerParams()
    _check_shapes(color, depth, cam)
    region = roi_from_space(space, gripper_pose, cam)

    in_polygon = region.polygon_mask()
    rgb = region.window(color.data)
    black = in_polygon & np.all(rgb < params.black_threshold, axis=2)

    window_depth = region.window(depth.data)
    rows, cols = np.nonzero(black & (window_depth > 0))
    in_box = np.zeros(region.shape, dtype=bool)
    points = np.empty((0, 3))
    if rows.size:
        world = back_project_pixels(
            cam, rows + region.row_min, cols + region.col_min, window_depth[rows, cols]
        )
        inside = space.contains(gripper_pose.inverse().apply(world))
        in_box[rows[inside], cols[inside]] = True
        points = np.full(region.shape + (3,), np.nan)
        points[rows[inside], cols[inside]] = world[inside]

    stage_counts = {
        'rectangle': region.pixel_count,
        'polygon': int(in_polygon.sum()),
        'black': int(black.sum()),
        'box': int(in_box.sum()),
    }
    labels, stats = floodfill(in_box)
    if len(stats) <= 1:
        logger.debug(f"Finger {space.side:+d}: no pixels left {stage_counts}")
        return None
    largest = 1 + int(np.argmax(stats[1:, 4]))
    count = int(stats[largest, 4])
    if count < params.min_finger_pixels:
        logger.debug(f"Finger {space.side:+d}: largest blob has {count} px {stage_counts}")
        return None
    position = points[labels == largest].mean(axis=0)
    return FingerDetection(space.side, position, count, stage_counts)


def combine_fingers(f1, f2, geom: GripperGeometry, orientation, tolerance=0.02):
    """
    Gripper-centre measurement from the finger detections.

    ``f1`` and ``f2`` are the positions (or None) of the -1 and +1 fingers.
    A lone finger is shifted by the model offset to the centre rotated by the
    commanded ``orientation``. Two fingers must sit ``gripper_width`` apart
    within ``tolerance``. Returns None on a detection failure.
    """
    if f1 is None and f2 is None:
        return None
    if f1 is not None and f2 is not None:
        f1, f2 = vec3(f1), vec3(f2)
        separation = np.linalg.norm(f1 - f2)
        if abs(separation - geom.gripper_width) > tolerance:
            logger.debug(f"Finger separation {separation:.4f} m rejected")
            return None
        return (f1 + f2) / 2
    side, finger = (-1, f1) if f1 is not None else (1, f2)
    beta = np.asarray(orientation, dtype=float) @ np.array([-side * geom.gripper_width / 2, 0.0, 0.0])
    return vec3(finger) + beta


def finger_debug_image(depth: DepthImage, space: FingerSpace, gripper_pose, cam: CameraModel):
    """
    RGB image of the range checks: blue where a pixel's 3-D point is inside
    the x range, green for y, red for z. White pixels pass all three.
    """
    image = np.zeros(depth.shape + (3,), dtype=np.uint8)
    rows, cols = np.nonzero(depth.valid)
    if not rows.size:
        return image
    world = back_project_pixels(cam, rows, cols, depth.data[rows, cols])
    local = gripper_pose.inverse().apply(world)
    for axis, channel in ((0, 2), (1, 1), (2, 0)):
        hit = (local[:, axis] >= space.lower[axis]) & (local[:, axis] <= space.upper[axis])
        image[rows[hit], cols[hit], channel] = 255
    return image
