"""
Synthetic grasping scene: a table, upright textured cylinders, a two-finger
gripper and a pan-tilt RGB-D camera.

World frame: z up, the arm base at the origin, the workspace along +x.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from apps.geometry.camera import CameraModel
from apps.geometry.transforms import RigidTransform, unit, vec3
from apps.gripper_track.spaces import LEFT, RIGHT, GripperGeometry

logger = logging.getLogger(__name__)

TARGET_OBJECT = 'object_0'

# Ray-cast surface labels.
NOTHING = 0
FLOOR = 1
TABLE = 2
FINGER_LABELS = {LEFT: 3, RIGHT: 4}
OBJECT_LABEL_BASE = 10


def object_label(index):
    return OBJECT_LABEL_BASE + index


@dataclass(frozen=True)
class ObjectSpec:
    object_id: str
    diameter: float
    height: float
    texture_seed: int

    @property
    def radius(self):
        return self.diameter / 2


def object_catalog(base_diameter=0.06, height=0.20):
    """The five objects of the database; ``object_0`` is the grasp target."""
    scales = (1.0, 0.85, 1.1, 0.9, 1.2)
    return tuple(
        ObjectSpec(f"object_{i}", base_diameter * s, height, 11 + i)
        for i, s in enumerate(scales)
    )


@dataclass(frozen=True)
class SceneConfig:
    table_height: float = 0.70
    table_x_min: float = -0.5
    table_x_max: float = 1.0
    table_y_min: float = -0.6
    table_y_max: float = 0.6
    max_range: float = 3.5
    placement_x: float = 0.45
    placement_y: float = 0.0
    placement_radius: float = 0.10
    object_diameter: float = 0.06
    object_height: float = 0.20
    keypoint_density: float = 3000.0
    descriptor_noise: float = 0.05
    descriptor_length: int = 16
    depth_noise_correlated_mm: float = 4.9
    depth_noise_white_mm: float = 1.0
    depth_noise_blur_px: float = 12.0
    image_width: int = 640
    image_height: int = 480
    fx: float = 525.0
    fy: float = 525.0
    cx: float = 319.5
    cy: float = 239.5
    mount_x: float = -0.25
    mount_y: float = 0.0
    mount_z: float = 0.96
    aim_x: float = 0.45
    aim_y: float = 0.0
    aim_z: float = 0.80
    table_color: tuple = (200, 190, 170)
    floor_color: tuple = (150, 150, 150)
    object_color: tuple = (128, 128, 128)
    dot_color: tuple = (90, 90, 90)
    finger_color: tuple = (20, 20, 20)

    def __post_init__(self):
        if self.table_x_min >= self.table_x_max or self.table_y_min >= self.table_y_max:
            raise ValueError("Table extent is empty")
        if self.placement_radius < 0 or self.keypoint_density <= 0:
            raise ValueError("placement_radius and keypoint_density must be non-negative/positive")
        if self.max_range <= 0:
            raise ValueError("max_range must be positive")

    @property
    def placement_center(self):
        return np.array([self.placement_x, self.placement_y])

    @property
    def aim_point(self):
        return vec3(self.aim_x, self.aim_y, self.aim_z)

    def camera(self) -> CameraModel:
        cam = CameraModel(
            self.fx, self.fy, self.cx, self.cy, self.image_width, self.image_height,
            pose=RigidTransform.from_translation(self.mount_x, self.mount_y, self.mount_z),
        )
        return cam.aimed_at(self.aim_point)

    def objects(self):
        return object_catalog(self.object_diameter, self.object_height)

    def object(self, object_id):
        for spec in self.objects():
            if spec.object_id == object_id:
                return spec
        raise KeyError(f"Unknown object {object_id!r}")


@dataclass(frozen=True)
class PlacedObject:
    spec: ObjectSpec
    x: float
    y: float
    yaw: float
    base_z: float

    @property
    def center(self):
        """Point on the axis at mid-height."""
        return vec3(self.x, self.y, self.base_z + self.spec.height / 2)

    @property
    def top_z(self):
        return self.base_z + self.spec.height


@dataclass(frozen=True)
class World:
    config: SceneConfig
    objects: tuple = ()
    gripper_pose: RigidTransform | None = None
    geometry: GripperGeometry = field(default_factory=GripperGeometry)

    def with_gripper(self, pose):
        return replace(self, gripper_pose=pose)


def sample_placement(config: SceneConfig, rng, spec: ObjectSpec):
    """Uniform position inside the placement circle, uniform yaw."""
    radius = config.placement_radius * np.sqrt(rng.random())
    angle = rng.uniform(0, 2 * np.pi)
    x, y = config.placement_center + radius * np.array([np.cos(angle), np.sin(angle)])
    return PlacedObject(spec, float(x), float(y), float(rng.uniform(0, 2 * np.pi)), config.table_height)


def place(config: SceneConfig, spec: ObjectSpec, x, y, yaw=0.0):
    return PlacedObject(spec, float(x), float(y), float(yaw), config.table_height)


def gripper_orientation(approach, axis=(0.0, 0.0, 1.0)):
    """
    Rotation (columns x_g, y_g, z_g) for an approach direction, closing
    perpendicular to the object axis.
    """
    axis = unit(axis)
    approach = vec3(approach)
    approach = unit(approach - (approach @ axis) * axis)
    x_g = unit(np.cross(axis, approach))
    z_g = -approach
    y_g = np.cross(z_g, x_g)
    return np.column_stack([x_g, y_g, z_g])


def pose_for_grasp_center(center, rotation, geometry: GripperGeometry) -> RigidTransform:
    """Gripper (palm) pose that puts the grasp centre at ``center``."""
    rotation = np.asarray(rotation, dtype=float)
    return RigidTransform(rotation, vec3(center) - rotation @ geometry.grasp_center())
