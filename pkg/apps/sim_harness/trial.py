"""
One grasping trial in simulated time, and the reference database build.

A trial detects the target object with the probabilistic database and the
position filter, plans a side grasp at the filtered position and approaches
it either open loop (NVGG) or under gripper tracking (VGG). The outcome is
classified against the true scene.

Usage:
    db = build_reference_db(config, n_views=50, seed=1)
    record = run_trial(VGG, 40, seed=7, db=db, config=config)
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from apps.depth_seg.segmentation import extract_rois
from apps.geometry.transforms import vec3
from apps.gripper_track.servo import GripperServo
from apps.gripper_track.spaces import NoVisibleRegion, roi_from_space
from apps.matching.descriptors import pixel_matrix
from apps.matching.matcher import ReferenceMatcher
from apps.posfilter.filter import FilterEntry, PositionFilter
from apps.refdb.database import ReferenceDatabase

from .arm import ArmModel, sample_model_error, sample_offset, step_toward
from .locator import locate_cylinder
from .outcomes import TrialOutcome, classify_grasp, plan_grasp
from .pipeline import MODES, VGG, PipelineConfig
from .render import raycast, render
from .scene import TARGET_OBJECT, World, gripper_orientation, place, pose_for_grasp_center, sample_placement
from .texture import ProceduralDescriptorSource

logger = logging.getLogger(__name__)

STREAMS = ('scene', 'arm', 'jitter', 'noise', 'descriptors', 'sampling', 'matching')

# Gripper orientation while parked at home during detection.
HOME_ROTATION = gripper_orientation((1.0, 0.0, 0.0))


def trial_streams(seed):
    """One independent generator per source of randomness."""
    children = np.random.SeedSequence(seed).spawn(len(STREAMS))
    return {name: np.random.default_rng(child) for name, child in zip(STREAMS, children)}


@dataclass(frozen=True)
class TrialRecord:
    seed: int
    mode: str
    model_error_mm: float
    outcome: TrialOutcome
    convergence_time_s: float | None = None
    matcher_invocations: int = 0
    frames: int = 0
    tracking_frames: int = 0
    mean_invocations_prob: float = 0.0
    mean_invocations_all: float = 0.0
    final_error_m: float | None = None

    def __post_init__(self):
        detected = self.outcome != TrialOutcome.OBJECT_NOT_DETECTED
        if detected != (self.convergence_time_s is not None):
            raise ValueError("Convergence time is recorded exactly when the object was detected")

    @property
    def success(self):
        return self.outcome.success

    def as_row(self):
        return {
            'seed': self.seed,
            'mode': self.mode,
            'model_error_mm': self.model_error_mm,
            'outcome': self.outcome.value,
            'convergence_time_s': self.convergence_time_s,
            'matcher_invocations': self.matcher_invocations,
            'frames': self.frames,
            'tracking_frames': self.tracking_frames,
            'mean_invocations_prob': self.mean_invocations_prob,
            'mean_invocations_all': self.mean_invocations_all,
            'final_error_m': self.final_error_m,
        }


@dataclass(eq=False)
class DetectionResult:
    position: np.ndarray | None
    axis: np.ndarray | None
    convergence_time_s: float | None
    invocations_prob: list = field(default_factory=list)
    invocations_all: list = field(default_factory=list)

    @property
    def detected(self):
        return self.position is not None

    @property
    def frames(self):
        return len(self.invocations_prob)


@dataclass(frozen=True, eq=False)
class ApproachResult:
    command: np.ndarray
    frames: int
    lost: bool = False


def keypoints_in(roi, keypoints):
    if not keypoints:
        return []
    px = pixel_matrix(keypoints)
    inside = roi.contains(px[:, 0], px[:, 1])
    return [kp for kp, ok in zip(keypoints, inside) if ok]


def match_roi(db: ReferenceDatabase, matcher: ReferenceMatcher, roi, keypoints, subset):
    """
    Match every sampled reference against one region.

    Returns:
        tuple: (best successful MatchResult or None, matched ids, unmatched ids)
    """
    best = None
    matched, unmatched = [], []
    for ref_id in subset:
        result = matcher.match(db.get(ref_id), roi, keypoints)
        if result.success:
            matched.append(ref_id)
            if best is None or result.inlier_count > best.inlier_count:
                best = result
        else:
            unmatched.append(ref_id)
    return best, matched, unmatched


def detect_object(world: World, true_cam, pipeline_cam, db: ReferenceDatabase, config: PipelineConfig,
                  streams, timeout_s=None) -> DetectionResult:
    """
    Frame loop until the position filter converges or the timeout expires.

    The scene is static, so it is ray-cast once and every frame only draws
    fresh sensor and descriptor noise.
    """
    trial = config.trial
    dt = trial.dt
    timeout_s = trial.detection_timeout_s if timeout_s is None else timeout_s
    seg_params = config.segmentation_for(TARGET_OBJECT)
    radius = config.scene.object(TARGET_OBJECT).radius
    viewpoint = pipeline_cam.world_from_camera().translation

    hits = raycast(world, true_cam)
    source = ProceduralDescriptorSource(config.scene.descriptor_noise, streams['descriptors'])
    matcher = ReferenceMatcher(config.matching, seed=int(streams['matching'].integers(2 ** 31)))
    position_filter = PositionFilter(config.filter)
    target_refs = len(db.references_for(TARGET_OBJECT))
    result = DetectionResult(None, None, None)

    for k in range(trial.frames_within(timeout_s)):
        t = k * dt
        frame = render(world, true_cam, rng=streams['noise'], hits=hits, time=t)
        keypoints = source.keypoints(frame)
        rois = extract_rois(frame.depth, pipeline_cam, seg_params)
        before = matcher.invocations
        for roi in rois:
            subset = db.sample_subset(config.refdb.subset_size, streams['sampling'], object_id=TARGET_OBJECT)
            best, matched, unmatched = match_roi(db, matcher, roi, keypoints, subset)
            db.update(matched, unmatched)
            if best is not None:
                h = locate_cylinder(roi.points, roi.principal_axis, radius, viewpoint)
                position_filter.push(FilterEntry(h, best.inlier_count, t, roi.principal_axis))
        result.invocations_prob.append(matcher.invocations - before)
        result.invocations_all.append(target_refs * len(rois))

        now = t + dt
        if position_filter.converged(now):
            estimate = position_filter.estimate(now)
            result.position, result.axis, result.convergence_time_s = estimate.position, estimate.axis, now
            logger.debug(f"Filter converged at {now:.1f} s with {len(estimate.kept)} entries")
            break
    return result


def finger_window(servo: GripperServo, model_pose, cam):
    """Union of the finger regions at the model pose, or None when neither is visible."""
    regions = []
    for space in servo.spaces.values():
        try:
            regions.append(roi_from_space(space, model_pose, cam))
        except NoVisibleRegion:
            continue
    if not regions:
        return None
    if len(regions) == 1:
        r = regions[0]
        return (r.row_min, r.col_min, r.row_max, r.col_max)
    return regions[0].union(regions[1])


def expected_observation(servo: GripperServo, model_pose, cam, window, config: PipelineConfig):
    """
    Measurement the tracker would make of a gripper sitting exactly at the
    model pose: a noiseless fingers-only render through the pipeline camera.
    """
    scene = World(config.scene, gripper_pose=model_pose, geometry=config.geometry)
    hits = raycast(scene, cam, window, scenery=False)
    frame = render(scene, cam, hits=hits, texture=False)
    return servo.measure(frame.color, frame.depth, cam, model_pose)


def servo_approach(world: World, true_cam, pipeline_cam, plan, arm: ArmModel, config: PipelineConfig,
                   streams, start) -> ApproachResult:
    """
    Drive the grasp centre through the plan's waypoints under gripper
    tracking. Each waypoint gets the tracking timeout; running out means the
    gripper was lost.
    """
    trial = config.trial
    geometry = config.geometry
    servo = GripperServo(geometry, config.tracker, start=start)
    limit = trial.frames_within(trial.tracking_timeout_s)
    command = vec3(start)
    frames = 0

    pipeline_cam = pipeline_cam.aimed_at(command)
    true_cam = replace(true_cam, pan=pipeline_cam.pan, tilt=pipeline_cam.tilt)

    for waypoint in plan.waypoints:
        for _ in range(limit):
            frames += 1
            model_pose = pose_for_grasp_center(command, plan.rotation, geometry)
            window = finger_window(servo, model_pose, pipeline_cam)
            actual = pose_for_grasp_center(arm.actual(command), plan.rotation, geometry)
            frame = render(world.with_gripper(actual), true_cam, rng=streams['noise'], window=window, texture=False)
            expected = expected_observation(servo, model_pose, pipeline_cam, window, config)
            step = servo.step(
                frame.color, frame.depth, pipeline_cam, model_pose, waypoint, trial.dt, model_position=expected,
            )
            if step.hold:
                continue
            pipeline_cam = pipeline_cam.aimed_at(step.gaze)
            true_cam = replace(true_cam, pan=pipeline_cam.pan, tilt=pipeline_cam.tilt)
            if np.linalg.norm(step.target - command) < trial.reach_tolerance:
                break
            command = step_toward(command, step.target, trial.arm_step)
        else:
            logger.info(
                f"Gripper lost after {frames} tracking frames "
                f"({servo.failures} detection failures, trace {servo.state.uncertainty:.4f})"
            )
            return ApproachResult(command, frames, lost=True)
    return ApproachResult(command, frames)


def open_loop_approach(plan, config: PipelineConfig, start) -> ApproachResult:
    """Command the waypoints directly, trusting the arm model."""
    command = vec3(start)
    frames = 0
    for waypoint in plan.waypoints:
        while not np.array_equal(command, waypoint):
            command = step_toward(command, waypoint, config.trial.arm_step)
            frames += 1
    return ApproachResult(command, frames)


def run_trial(mode, model_error_mm, seed, db: ReferenceDatabase, config: PipelineConfig | None = None,
              placement=None, yaw=None, arm_offset=None, model_error=None,
              detection_timeout_s=None) -> TrialRecord:
    """
    Run one seeded trial end to end.

    Args:
        mode: VGG or NVGG
        model_error_mm: length of the random camera-to-arm error
        placement: (x, y) of the target instead of a random placement
        arm_offset, model_error: fixed vectors (metres) instead of random ones

    Raises:
        ValueError: on an unknown mode
    """
    if mode not in MODES:
        raise ValueError(f"Unknown mode {mode!r}; expected one of {MODES}")
    config = config or PipelineConfig()
    scene = config.scene
    trial = config.trial
    streams = trial_streams(seed)

    spec = scene.object(TARGET_OBJECT)
    obj = sample_placement(scene, streams['scene'], spec)
    if placement is not None:
        obj = place(scene, spec, placement[0], placement[1], obj.yaw)
    if yaw is not None:
        obj = replace(obj, yaw=float(yaw))

    offset = sample_offset(streams['arm'], trial.arm_offset_max)
    error = sample_model_error(streams['arm'], model_error_mm / 1000.0)
    if arm_offset is not None:
        offset = vec3(arm_offset)
    if model_error is not None:
        error = vec3(model_error)
    arm = ArmModel(offset, trial.arm_jitter, streams['jitter'])

    true_cam = scene.camera()
    pipeline_cam = true_cam.shifted(error)
    world = World(scene, (obj,), geometry=config.geometry)
    parked = world.with_gripper(pose_for_grasp_center(arm.actual(trial.home), HOME_ROTATION, config.geometry))

    db.reset_uniform()
    detection = detect_object(parked, true_cam, pipeline_cam, db, config, streams, detection_timeout_s)
    common = dict(
        seed=seed, mode=mode, model_error_mm=float(model_error_mm),
        convergence_time_s=detection.convergence_time_s,
        matcher_invocations=int(sum(detection.invocations_prob)),
        mean_invocations_prob=float(np.mean(detection.invocations_prob)) if detection.frames else 0.0,
        mean_invocations_all=float(np.mean(detection.invocations_all)) if detection.frames else 0.0,
    )
    if not detection.detected:
        logger.info(f"Trial {seed} ({mode}, {model_error_mm:g} mm): object not detected")
        return TrialRecord(outcome=TrialOutcome.OBJECT_NOT_DETECTED, frames=detection.frames, **common)

    plan = plan_grasp(detection.position, detection.axis, trial.standoff)
    if mode == VGG:
        approach = servo_approach(world, true_cam, pipeline_cam, plan, arm, config, streams, trial.home)
    else:
        approach = open_loop_approach(plan, config, trial.home)
    frames = detection.frames + approach.frames
    tracking_frames = approach.frames if mode == VGG else 0
    if approach.lost:
        logger.info(f"Trial {seed} ({mode}, {model_error_mm:g} mm): gripper lost")
        return TrialRecord(
            outcome=TrialOutcome.GRIPPER_LOST, frames=frames, tracking_frames=tracking_frames, **common,
        )

    final = arm.actual(approach.command)
    outcome = classify_grasp(
        final, plan.rotation, obj, config.geometry, scene.table_height,
        trial.contact_tolerance, trial.friction_margin,
    )
    final_error = float(np.hypot(final[0] - obj.x, final[1] - obj.y))
    logger.info(
        f"Trial {seed} ({mode}, {model_error_mm:g} mm): {outcome.value}, "
        f"converged in {detection.convergence_time_s:.1f} s, grasp error {final_error * 1000:.1f} mm"
    )
    return TrialRecord(
        outcome=outcome, frames=frames, tracking_frames=tracking_frames, final_error_m=final_error, **common,
    )


def build_reference_db(config: PipelineConfig | None = None, n_views=50, seed=0, progress=None) -> ReferenceDatabase:
    """
    Render every catalog object alone at ``n_views`` random placements and
    store the keypoints of each segmented region as one reference.

    Args:
        progress: optional callable invoked once per rendered view

    Raises:
        ValueError: if n_views < 1
        InfeasibleBounds: if the configured weight bounds cannot hold for the built size
    """
    if n_views < 1:
        raise ValueError(f"n_views must be >= 1, got {n_views}")
    config = config or PipelineConfig()
    scene = config.scene
    cam = scene.camera()
    placement_rng, noise_rng, descriptor_rng = (
        np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(3)
    )
    source = ProceduralDescriptorSource(scene.descriptor_noise, descriptor_rng)
    db = ReferenceDatabase()

    for spec in scene.objects():
        params = config.segmentation_for(spec.object_id)
        for view in range(n_views):
            obj = sample_placement(scene, placement_rng, spec)
            frame = render(World(scene, (obj,), geometry=config.geometry), cam, rng=noise_rng)
            rois = extract_rois(frame.depth, cam, params)
            if progress is not None:
                progress()
            if not rois:
                logger.warning(f"No region found for {spec.object_id} view {view}; view skipped")
                continue
            keypoints = source.keypoints(frame)
            for roi in rois:
                kept = keypoints_in(roi, keypoints)
                if not kept:
                    logger.warning(f"Region of {spec.object_id} view {view} holds no keypoints; skipped")
                    continue
                db.insert(spec.object_id, kept)

    db.apply_params(config.refdb)
    db.reset_uniform()
    logger.info(f"Built reference database: {len(db)} references over {len(db.object_ids())} objects")
    return db
