"""
Grasp planning and quasi-static outcome classification.

The object is an upright cylinder; the gripper closes across it
perpendicular to the approach direction. Contacts are decided from overlaps
in the gripper frame, with no dynamics.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, replace

import numpy as np

from apps.geometry.transforms import unit, vec3
from apps.gripper_track.spaces import LEFT, RIGHT, GripperGeometry, finger_space

from .scene import PlacedObject, gripper_orientation, pose_for_grasp_center

logger = logging.getLogger(__name__)

CONTACT_TOLERANCE_M = 0.025
FRICTION_MARGIN_M = 0.005


class TrialOutcome(str, enum.Enum):
    OBJECT_NOT_DETECTED = 'ObjectNotDetected'
    GRIPPER_LOST = 'GripperLost'
    GRASPING_FAILED = 'GraspingFailed'
    LIFTING_FAILED = 'LiftingFailed'
    OBJECT_TOUCHED = 'ObjectTouched'
    OBJECT_NOT_TOUCHED = 'ObjectNotTouched'

    @property
    def success(self):
        return self in SUCCESS_OUTCOMES


SUCCESS_OUTCOMES = frozenset({TrialOutcome.OBJECT_TOUCHED, TrialOutcome.OBJECT_NOT_TOUCHED})


@dataclass(frozen=True, eq=False)
class GraspPlan:
    rotation: np.ndarray
    approach: np.ndarray
    grasp_center: np.ndarray
    pregrasp_center: np.ndarray

    @property
    def waypoints(self):
        return (self.pregrasp_center, self.grasp_center)


def plan_grasp(position, axis, standoff, base=(0.0, 0.0, 0.0)) -> GraspPlan:
    """Approach horizontally from the arm base, closing across the object axis."""
    position = vec3(position)
    axis = unit(axis)
    toward = position - vec3(base)
    toward = toward - (toward @ axis) * axis
    approach = unit(toward)
    return GraspPlan(
        rotation=gripper_orientation(approach, axis),
        approach=approach,
        grasp_center=position,
        pregrasp_center=position - standoff * approach,
    )


def classify_grasp(center, rotation, obj: PlacedObject, geometry: GripperGeometry, table_height,
                   contact_tolerance=CONTACT_TOLERANCE_M, friction_margin=FRICTION_MARGIN_M) -> TrialOutcome:
    """
    Outcome of closing the gripper with its grasp centre at ``center`` (true
    world frame) around ``obj``.
    """
    rotation = np.asarray(rotation, dtype=float)
    pose = pose_for_grasp_center(center, rotation, geometry)
    nominal = replace(geometry, arm_error_margin=0.0)
    corners = np.vstack([pose.apply(finger_space(nominal, side).corners()) for side in (LEFT, RIGHT)])
    if corners[:, 2].min() < table_height or corners[:, 2].min() > obj.top_z:
        return TrialOutcome.GRASPING_FAILED

    r = obj.spec.radius
    approach = -rotation[:, 2]
    axis_point = vec3(obj.x, obj.y, center[2])
    lateral = (axis_point - center) @ rotation[:, 0]
    overshoot = (center - axis_point) @ approach

    touched = False
    clearance = (geometry.gripper_width - geometry.finger_width) / 2 - r
    overlap = abs(lateral) - clearance
    if overlap > contact_tolerance:
        return TrialOutcome.GRASPING_FAILED
    touched |= overlap > 0

    palm = overshoot - (geometry.finger_length / 2 - r)
    if palm > contact_tolerance:
        return TrialOutcome.GRASPING_FAILED
    touched |= palm > 0

    short = -overshoot - geometry.finger_length / 2
    if short > 0:
        if short >= r:
            return TrialOutcome.GRASPING_FAILED
        chord = 2 * np.sqrt(r ** 2 - short ** 2)
        if chord < obj.spec.diameter - friction_margin:
            return TrialOutcome.LIFTING_FAILED

    return TrialOutcome.OBJECT_TOUCHED if touched else TrialOutcome.OBJECT_NOT_TOUCHED
