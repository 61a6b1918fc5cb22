"""
Proportional correction of arm commands from the tracked gripper position.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from apps.geometry.transforms import vec3

from .detection import combine_fingers, detect_finger
from .kalman import TrackerParams, TrackerState, kalman_step
from .spaces import LEFT, RIGHT, GripperGeometry, NoVisibleRegion, finger_space

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ServoCommand:
    """``target`` is None while holding; ``gaze`` is None while holding."""
    hold: bool
    target: np.ndarray | None = None
    gaze: np.ndarray | None = None


def servo_correction(state: TrackerState, commanded_target, model_position, gain=None) -> ServoCommand:
    params = state.params
    if state.uncertainty > params.trace_threshold:
        return ServoCommand(hold=True)
    gain = params.gain if gain is None else gain
    error = vec3(model_position) - state.position
    return ServoCommand(hold=False, target=vec3(commanded_target) + gain * error, gaze=state.position)


class GripperServo:
    """
    Per-frame tracking loop: detect both fingers around the model pose,
    fuse the measurement and correct the command.
    """

    def __init__(self, geometry: GripperGeometry, params: TrackerParams | None = None, start=None):
        self.geometry = geometry
        self.params = params or TrackerParams()
        self.spaces = {side: finger_space(geometry, side) for side in (LEFT, RIGHT)}
        self.state = TrackerState.initial(np.zeros(3) if start is None else start, self.params)
        self.frames = 0
        self.failures = 0

    def reset(self, position):
        self.state = TrackerState.initial(position, self.params)
        self.frames = self.failures = 0

    def measure(self, color, depth, cam, model_pose):
        detections = {}
        for side, space in self.spaces.items():
            try:
                found = detect_finger(color, depth, space, model_pose, cam, self.params)
            except NoVisibleRegion:
                found = None
            detections[side] = None if found is None else found.position
        return combine_fingers(
            detections[LEFT], detections[RIGHT], self.geometry, model_pose.rotation,
            self.params.finger_distance_tol,
        )

    def step(self, color, depth, cam, model_pose, commanded_target, dt, model_position=None) -> ServoCommand:
        """
        Args:
            model_pose: gripper pose the arm model believes in
            commanded_target: grasp-centre target before correction
            model_position: grasp centre the tracker should see at
                ``model_pose``; defaults to the geometric grasp centre
        """
        measurement = self.measure(color, depth, cam, model_pose)
        self.frames += 1
        if measurement is None:
            self.failures += 1
        self.state = kalman_step(self.state, dt, measurement)
        if model_position is None:
            model_position = model_pose.apply(self.geometry.grasp_center())
        command = servo_correction(self.state, commanded_target, model_position)
        logger.debug(
            f"Servo frame {self.frames}: hold={command.hold} trace={self.state.uncertainty:.5f}"
        )
        return command
