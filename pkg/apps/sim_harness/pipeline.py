"""Parameter bundle for a simulated experiment."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

from apps.depth_seg.segmentation import SegParams
from apps.geometry.transforms import vec3
from apps.gripper_track.kalman import TrackerParams
from apps.gripper_track.spaces import GripperGeometry
from apps.matching.matcher import MatchingParams
from apps.posfilter.filter import FilterParams
from apps.refdb.database import RefDbParams

from .scene import SceneConfig

logger = logging.getLogger(__name__)

VGG = 'vgg'
NVGG = 'nvgg'
MODES = (VGG, NVGG)

# The object-table crease of the simulated scene stays below the generic t2,
# and its bottom corners need a wider closing to seal the outline.
SIMULATOR_SEGMENTATION = SegParams(t2=0.2, dilate_close_r=3)


@dataclass(frozen=True)
class TrialParams:
    frame_rate_hz: float = 10.0
    detection_timeout_s: float = 30.0
    tracking_timeout_s: float = 30.0
    arm_offset_max: float = 0.03
    arm_jitter: float = 0.003
    home_x: float = 0.22
    home_y: float = -0.18
    home_z: float = 0.90
    standoff: float = 0.10
    arm_step: float = 0.02
    reach_tolerance: float = 0.01
    contact_tolerance: float = 0.025
    friction_margin: float = 0.005

    def __post_init__(self):
        if self.frame_rate_hz <= 0:
            raise ValueError("frame_rate_hz must be positive")
        if self.detection_timeout_s <= 0 or self.tracking_timeout_s <= 0:
            raise ValueError("Timeouts must be positive")
        if self.arm_step <= 0 or self.reach_tolerance <= 0:
            raise ValueError("arm_step and reach_tolerance must be positive")

    @property
    def dt(self):
        return 1.0 / self.frame_rate_hz

    @property
    def home(self):
        return vec3(self.home_x, self.home_y, self.home_z)

    def frames_within(self, seconds):
        return int(round(seconds * self.frame_rate_hz))


@dataclass(frozen=True)
class PipelineConfig:
    scene: SceneConfig = field(default_factory=SceneConfig)
    segmentation: SegParams = SIMULATOR_SEGMENTATION
    matching: MatchingParams = field(default_factory=MatchingParams)
    refdb: RefDbParams = field(default_factory=RefDbParams)
    filter: FilterParams = field(default_factory=FilterParams)
    tracker: TrackerParams = field(default_factory=TrackerParams)
    geometry: GripperGeometry = field(default_factory=GripperGeometry)
    trial: TrialParams = field(default_factory=TrialParams)

    def segmentation_for(self, object_id):
        spec = self.scene.object(object_id)
        return self.segmentation.for_object(spec.diameter, spec.height)
