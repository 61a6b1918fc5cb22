import tempfile
from dataclasses import replace
from io import StringIO
from pathlib import Path
from unittest import mock

import numpy as np
import pandas as pd
from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase
from numpy.testing import assert_allclose
from rest_framework.exceptions import ValidationError
from rest_framework.test import APIClient

from apps.depth_seg.segmentation import extract_rois
from apps.geometry.camera import CameraModel, PixelCoord
from apps.geometry.transforms import RigidTransform, vec3
from apps.matching.descriptors import Keypoint
from apps.refdb.database import ReferenceDatabase

from .arm import ArmModel, sample_offset, step_toward
from .experiment import (
    RESULT_COLUMNS, RecordedFrame, bench_matching, convergence_histogram, database_prefix,
    fraction_converged_within, outcome_table, records_frame, run_experiment, summarize, trial_seeds,
    write_results_csv,
)
from .locator import locate_cylinder
from .models import ExperimentRun, TrialResult
from .outcomes import TrialOutcome, classify_grasp, plan_grasp
from .pipeline import NVGG, VGG, PipelineConfig
from .render import raycast, render
from .scene import (
    FINGER_LABELS, TARGET_OBJECT, World, gripper_orientation, place, pose_for_grasp_center,
    sample_placement,
)
from .serializers import SceneConfigSerializer, build_pipeline_config, load_pipeline_config
from .texture import ProceduralDescriptorSource, anchor_descriptor
from .trial import TrialRecord, build_reference_db, detect_object, run_trial, trial_streams

CONFIG = PipelineConfig()
SCENE = CONFIG.scene
TARGET = SCENE.object(TARGET_OBJECT)

# Horizontal camera at 0.8 m looking along world +y.
LEVEL_CAM = CameraModel(525.0, 525.0, 319.5, 239.5, 640, 480, pose=RigidTransform.from_translation(0.0, 0.0, 0.8))
WIDE_TABLE = replace(SCENE, table_y_max=1.5)


def record(outcome, seed=0, time=1.0, mode=VGG, prob=2.0, every=10.0):
    return TrialRecord(
        seed=seed, mode=mode, model_error_mm=0.0, outcome=outcome,
        convergence_time_s=None if outcome == TrialOutcome.OBJECT_NOT_DETECTED else time,
        mean_invocations_prob=prob, mean_invocations_all=every,
    )


class RenderTests(SimpleTestCase):

    def test_empty_scene_has_no_regions(self):
        frame = render(World(SCENE), SCENE.camera(), rng=np.random.default_rng(0))
        self.assertIsNone(frame.anchors)
        self.assertEqual(extract_rois(frame.depth, SCENE.camera(), CONFIG.segmentation_for(TARGET_OBJECT)), [])

    def test_silhouette_matches_analytic_projection(self):
        distance = 1.0
        obj = place(WIDE_TABLE, TARGET, 0.0, distance)
        frame = render(World(WIDE_TABLE, (obj,)), LEVEL_CAM, texture=False)
        mask = frame.object_mask()

        cols = np.flatnonzero(mask[240])
        half = LEVEL_CAM.fx * np.tan(np.arcsin(TARGET.radius / distance))
        self.assertLessEqual(abs(cols.min() - (LEVEL_CAM.cx - half)), 1.0)
        self.assertLessEqual(abs(cols.max() - (LEVEL_CAM.cx + half)), 1.0)

        rows = np.flatnonzero(mask[:, 320])
        top = LEVEL_CAM.cy - LEVEL_CAM.fy * (obj.top_z - 0.8) / (distance - TARGET.radius)
        self.assertLessEqual(abs(rows.min() - top), 1.0)

    def test_noiseless_depth_is_the_near_surface(self):
        obj = place(WIDE_TABLE, TARGET, 0.0, 1.0)
        frame = render(World(WIDE_TABLE, (obj,)), LEVEL_CAM, texture=False)
        self.assertEqual(int(frame.depth.data[240, 320]), 970)

    def test_gripper_occludes_the_object(self):
        obj = place(WIDE_TABLE, TARGET, 0.0, 1.0)
        world = World(WIDE_TABLE, (obj,))
        rotation = gripper_orientation((0.0, 1.0, 0.0))
        center = (world.geometry.gripper_width / 2, 0.5, 0.8)
        occluded = world.with_gripper(pose_for_grasp_center(center, rotation, world.geometry))

        bare = raycast(world, LEVEL_CAM)
        hits = raycast(occluded, LEVEL_CAM)
        fingers = np.isin(hits.labels, list(FINGER_LABELS.values()))
        bare_object = bare.labels == 10
        self.assertTrue((bare_object & fingers).any())
        np.testing.assert_array_equal(hits.labels == 10, bare_object & ~fingers)

    def test_window_only_casts_inside(self):
        obj = place(WIDE_TABLE, TARGET, 0.0, 1.0)
        world = World(WIDE_TABLE, (obj,))
        hits = raycast(world, LEVEL_CAM, window=(200, 300, 260, 340))
        full = raycast(world, LEVEL_CAM)
        self.assertFalse(hits.hit[:200].any())
        self.assertFalse(hits.hit[:, 341:].any())
        self.assertTrue(hits.hit[200:261, 300:341].any())
        np.testing.assert_array_equal(hits.labels[200:261, 300:341], full.labels[200:261, 300:341])


class TextureTests(SimpleTestCase):

    def setUp(self):
        obj = sample_placement(SCENE, np.random.default_rng(5), TARGET)
        self.frame = render(World(SCENE, (obj,)), SCENE.camera(), rng=np.random.default_rng(6))

    def test_keypoints_lie_on_the_visible_object(self):
        keypoints = ProceduralDescriptorSource(0.05, np.random.default_rng(0)).keypoints(self.frame)
        self.assertGreater(len(keypoints), 20)
        mask = self.frame.object_mask()
        self.assertTrue(all(mask[kp.px.row, kp.px.col] for kp in keypoints))

    def test_descriptor_noise_is_fresh_per_call(self):
        source = ProceduralDescriptorSource(0.05, np.random.default_rng(0))
        first, second = source.keypoints(self.frame), source.keypoints(self.frame)
        self.assertEqual([kp.px for kp in first], [kp.px for kp in second])
        self.assertFalse(np.allclose(first[0].descriptor, second[0].descriptor))
        assert_allclose(first[0].descriptor, second[0].descriptor, atol=0.5)

    def test_anchor_descriptor_is_deterministic(self):
        assert_allclose(anchor_descriptor(11, 0.3, 0.1, 16), anchor_descriptor(11, 0.3, 0.1, 16))
        self.assertFalse(np.allclose(anchor_descriptor(11, 0.3, 0.1, 16), anchor_descriptor(12, 0.3, 0.1, 16)))


class SegmentationSceneTests(SimpleTestCase):

    def test_single_region_overlaps_ground_truth(self):
        cam = SCENE.camera()
        params = CONFIG.segmentation_for(TARGET_OBJECT)
        rng = np.random.default_rng(2024)
        found = 0
        for _ in range(20):
            obj = sample_placement(SCENE, rng, TARGET)
            frame = render(World(SCENE, (obj,)), cam, rng=rng, texture=False)
            rois = extract_rois(frame.depth, cam, params)
            found += len(rois) == 1 and rois[0].iou(frame.object_mask()) >= 0.6
        self.assertGreaterEqual(found, 19)

    def test_outline_closes_at_the_bottom_corners(self):
        cam = SCENE.camera()
        obj = place(SCENE, TARGET, 0.45, 0.0)
        frame = render(World(SCENE, (obj,)), cam, texture=False)
        rois = extract_rois(frame.depth, cam, CONFIG.segmentation_for(TARGET_OBJECT))
        self.assertEqual(len(rois), 1)
        self.assertGreaterEqual(rois[0].iou(frame.object_mask()), 0.6)

    def test_narrow_closing_leaks_into_the_table(self):
        cam = SCENE.camera()
        obj = place(SCENE, TARGET, 0.45, 0.0)
        frame = render(World(SCENE, (obj,)), cam, texture=False)
        narrow = replace(CONFIG.segmentation_for(TARGET_OBJECT), t2=0.25, dilate_close_r=2)
        self.assertEqual(extract_rois(frame.depth, cam, narrow), [])


class LocatorTests(SimpleTestCase):

    def side_points(self, center, radius, rng, noise=0.0):
        theta = rng.uniform(np.pi / 2 + 0.2, 3 * np.pi / 2 - 0.2, 600)
        z = rng.uniform(0.7, 0.9, 600)
        points = np.column_stack([center[0] + radius * np.cos(theta), center[1] + radius * np.sin(theta), z])
        return points + rng.normal(0.0, noise, points.shape)

    def test_recovers_the_axis_behind_the_visible_surface(self):
        rng = np.random.default_rng(0)
        points = self.side_points((0.45, 0.05), 0.03, rng)
        found = locate_cylinder(points, (0, 0, 1), 0.03, viewpoint=(-0.25, 0.0, 0.96))
        side = points[:, 2] < points[:, 2].max() - 0.015
        assert_allclose(found, [0.45, 0.05, points[side, 2].mean()], atol=1e-4)

    def test_tolerates_sensor_noise(self):
        rng = np.random.default_rng(1)
        points = self.side_points((0.40, -0.08), 0.03, rng, noise=0.001)
        found = locate_cylinder(points, (0, 0, 1), 0.03, viewpoint=(-0.25, 0.0, 0.96))
        assert_allclose(found[:2], [0.40, -0.08], atol=0.003)


class GraspTests(SimpleTestCase):

    def setUp(self):
        self.obj = place(SCENE, TARGET, 0.45, 0.0)
        self.plan = plan_grasp((0.45, 0.0, 0.8), (0, 0, 1), standoff=0.10)
        self.geometry = CONFIG.geometry

    def classify(self, shift):
        center = vec3(0.45, 0.0, 0.8) + vec3(shift)
        return classify_grasp(center, self.plan.rotation, self.obj, self.geometry, SCENE.table_height)

    def test_plan_approaches_from_the_base(self):
        assert_allclose(self.plan.approach, [1, 0, 0], atol=1e-12)
        assert_allclose(self.plan.pregrasp_center, [0.35, 0.0, 0.8], atol=1e-12)
        assert_allclose(self.plan.rotation[:, 0], [0, 1, 0], atol=1e-12)
        assert_allclose(self.plan.rotation[:, 2], [-1, 0, 0], atol=1e-12)
        self.assertAlmostEqual(np.linalg.det(self.plan.rotation), 1.0)

    def test_plan_drops_the_axis_component(self):
        plan = plan_grasp((0.5, 0.0, 0.9), (0, 0, 1), standoff=0.1, base=(0, 0, 0.2))
        self.assertAlmostEqual(plan.approach[2], 0.0)

    def test_centered_grasp_does_not_touch(self):
        self.assertEqual(self.classify((0, 0, 0)), TrialOutcome.OBJECT_NOT_TOUCHED)

    def test_small_lateral_error_touches(self):
        self.assertEqual(self.classify((0, 0.01, 0)), TrialOutcome.OBJECT_TOUCHED)

    def test_large_lateral_error_collides(self):
        self.assertEqual(self.classify((0, 0.04, 0)), TrialOutcome.GRASPING_FAILED)

    def test_palm_contact(self):
        self.assertEqual(self.classify((0.01, 0, 0)), TrialOutcome.OBJECT_TOUCHED)
        self.assertEqual(self.classify((0.04, 0, 0)), TrialOutcome.GRASPING_FAILED)

    def test_fingertips_short_of_the_axis(self):
        self.assertEqual(self.classify((-0.05, 0, 0)), TrialOutcome.LIFTING_FAILED)
        self.assertEqual(self.classify((-0.08, 0, 0)), TrialOutcome.GRASPING_FAILED)

    def test_fingers_outside_the_object_height(self):
        self.assertEqual(self.classify((0, 0, -0.095)), TrialOutcome.GRASPING_FAILED)
        self.assertEqual(self.classify((0, 0, 0.15)), TrialOutcome.GRASPING_FAILED)


class ArmTests(SimpleTestCase):

    def test_offset_stays_in_the_ball(self):
        rng = np.random.default_rng(0)
        norms = [np.linalg.norm(sample_offset(rng, 0.03)) for _ in range(1000)]
        self.assertLessEqual(max(norms), 0.03)

    def test_actual_pose_differs_from_the_report(self):
        arm = ArmModel(vec3(0.01, 0, 0), 0.0, np.random.default_rng(0))
        assert_allclose(arm.actual((0.2, 0.0, 0.9)), [0.21, 0.0, 0.9])

    def test_step_toward(self):
        assert_allclose(step_toward((0, 0, 0), (1, 0, 0), 0.02), [0.02, 0, 0])
        assert_allclose(step_toward((0, 0, 0), (0.01, 0, 0), 0.02), [0.01, 0, 0])


class TrialRecordTests(SimpleTestCase):

    def test_convergence_time_only_with_detection(self):
        with self.assertRaises(ValueError):
            TrialRecord(0, VGG, 0.0, TrialOutcome.OBJECT_NOT_DETECTED, convergence_time_s=1.0)
        with self.assertRaises(ValueError):
            TrialRecord(0, VGG, 0.0, TrialOutcome.OBJECT_TOUCHED)

    def test_streams_are_reproducible(self):
        a, b = trial_streams(5), trial_streams(5)
        self.assertEqual(a['arm'].random(), b['arm'].random())
        self.assertNotEqual(trial_streams(5)['arm'].random(), trial_streams(5)['scene'].random())


class ReferenceDatabaseBuildTests(SimpleTestCase):

    def test_zero_views_is_rejected(self):
        with self.assertRaises(ValueError):
            build_reference_db(CONFIG, n_views=0)

    def test_one_view_per_object(self):
        db = build_reference_db(CONFIG, n_views=1, seed=3)
        self.assertEqual(db.object_ids(), [spec.object_id for spec in SCENE.objects()])
        self.assertEqual(len(db), 5)
        assert_allclose(db.weights, np.full(5, 0.2))


class TrialTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.db = build_reference_db(CONFIG, n_views=3, seed=1)

    def test_nvgg_never_tracks_the_gripper_and_is_deterministic(self):
        with mock.patch('apps.sim_harness.trial.GripperServo') as servo:
            first = run_trial(NVGG, 0, 11, self.db, CONFIG)
        servo.assert_not_called()
        second = run_trial(NVGG, 0, 11, self.db, CONFIG)
        self.assertEqual(first, second)
        self.assertEqual(first.tracking_frames, 0)

    def test_nvgg_model_error_along_the_approach_fails(self):
        result = run_trial(
            NVGG, 40, 12, self.db, CONFIG, placement=(0.45, 0.0), arm_offset=(0, 0, 0), model_error=(0.04, 0, 0),
        )
        self.assertIsNotNone(result.convergence_time_s)
        self.assertIn(result.outcome, (TrialOutcome.GRASPING_FAILED, TrialOutcome.LIFTING_FAILED))

    def test_vgg_without_model_error_succeeds(self):
        result = run_trial(VGG, 0, 13, self.db, CONFIG)
        self.assertIsNotNone(result.convergence_time_s)
        self.assertGreater(result.tracking_frames, 0)
        self.assertTrue(result.success, result.outcome)

    def test_object_outside_the_view_is_not_detected(self):
        result = run_trial(VGG, 0, 14, self.db, CONFIG, placement=(0.45, 1.5), detection_timeout_s=1.0)
        self.assertEqual(result.outcome, TrialOutcome.OBJECT_NOT_DETECTED)
        self.assertIsNone(result.convergence_time_s)
        self.assertEqual(result.frames, 10)

    def test_invocations_per_frame_are_bounded(self):
        obj = sample_placement(SCENE, np.random.default_rng(8), TARGET)
        world = World(SCENE, (obj,), geometry=CONFIG.geometry)
        cam = SCENE.camera()
        self.db.reset_uniform()
        result = detect_object(world, cam, cam, self.db, CONFIG, trial_streams(8), timeout_s=1.0)
        n = len(self.db.references_for(TARGET_OBJECT))
        for prob, every in zip(result.invocations_prob, result.invocations_all):
            self.assertEqual(every % n, 0)
            self.assertLessEqual(prob, CONFIG.refdb.subset_size * every // n)
        self.db.check_invariants()


class ConditionOrderingTests(SimpleTestCase):
    """Reduced seeded runs of the four experiment conditions."""

    TRIALS = 4

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.db = build_reference_db(CONFIG, n_views=3, seed=2)

    def successes(self, mode, model_error_mm):
        records = run_experiment(mode, model_error_mm, self.TRIALS, 31, self.db, CONFIG)
        self.assertTrue(all(r.convergence_time_s is not None for r in records))
        return sum(r.success for r in records)

    def test_both_modes_succeed_without_model_error(self):
        self.assertEqual(self.successes(VGG, 0), self.TRIALS)
        self.assertGreaterEqual(self.successes(NVGG, 0), self.TRIALS - 1)

    def test_visual_guidance_beats_open_loop_under_model_error(self):
        guided = self.successes(VGG, 40)
        self.assertEqual(guided, self.TRIALS)
        self.assertLessEqual(self.successes(NVGG, 40), guided)

    def test_error_along_the_approach_only_hurts_the_open_loop(self):
        error = (0.04, 0.0, 0.0)
        for seed in trial_seeds(32, 2):
            guided = run_trial(
                VGG, 40, seed, self.db, CONFIG, placement=(0.45, 0.0), arm_offset=(0, 0, 0), model_error=error,
            )
            blind = run_trial(
                NVGG, 40, seed, self.db, CONFIG, placement=(0.45, 0.0), arm_offset=(0, 0, 0), model_error=error,
            )
            self.assertTrue(guided.success, guided.outcome)
            self.assertFalse(blind.success, blind.outcome)


class WholeImage:
    def contains(self, rows, cols):
        return np.ones(np.shape(rows), dtype=bool)


class ExperimentTests(SimpleTestCase):

    def test_outcome_table_lists_every_outcome(self):
        records = [record(TrialOutcome.OBJECT_TOUCHED), record(TrialOutcome.OBJECT_TOUCHED),
                   record(TrialOutcome.GRIPPER_LOST), record(TrialOutcome.OBJECT_NOT_DETECTED)]
        table = outcome_table(records_frame(records))
        self.assertEqual(len(table), 6)
        self.assertEqual(table.loc[('Success', 'ObjectTouched'), 'count'], 2)
        self.assertAlmostEqual(table.loc[('Success', 'ObjectTouched'), 'frequency'], 0.5)
        self.assertEqual(table.loc[('Failure', 'GripperLost'), 'count'], 1)
        self.assertEqual(table['count'].sum(), 4)

    def test_single_trial_has_one_nonzero_count(self):
        table = outcome_table(records_frame([record(TrialOutcome.LIFTING_FAILED)]))
        self.assertEqual((table['count'] > 0).sum(), 1)

    def test_histogram_bins(self):
        histogram = convergence_histogram([0.5, 1.5, 1.7, None, 29.9], bin_s=1.0, timeout_s=30.0)
        self.assertEqual(len(histogram), 30)
        self.assertEqual(histogram['count'].tolist()[:3], [1, 2, 0])
        self.assertEqual(histogram['count'].iloc[-1], 1)
        self.assertEqual(histogram['count'].sum(), 4)

    def test_fast_convergence_share_and_caveat(self):
        frame = pd.DataFrame({'convergence_time_s': [0.5, 1.5, 1.7, 3.0, None]})
        self.assertAlmostEqual(fraction_converged_within(frame), 0.75)
        slow = pd.DataFrame({'convergence_time_s': [2.5, 3.0, 1.0]})
        with self.assertLogs('apps.sim_harness.experiment', level='WARNING'):
            self.assertAlmostEqual(fraction_converged_within(slow), 1 / 3)

    def test_summary(self):
        records = [record(TrialOutcome.OBJECT_NOT_TOUCHED, prob=2.0, every=10.0),
                   record(TrialOutcome.GRASPING_FAILED, prob=4.0, every=20.0)]
        summary = summarize(records)
        self.assertAlmostEqual(summary.success_frequency, 0.5)
        self.assertAlmostEqual(summary.mean_invocations_prob, 3.0)
        self.assertAlmostEqual(summary.mean_invocations_all, 15.0)

    def test_results_csv_columns(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'results.csv'
            write_results_csv(records_frame([record(TrialOutcome.OBJECT_TOUCHED)]), path)
            self.assertEqual(pd.read_csv(path).columns.tolist(), RESULT_COLUMNS)

    def test_trial_seeds(self):
        self.assertEqual(trial_seeds(3, 4), trial_seeds(3, 4))
        self.assertEqual(len(set(trial_seeds(3, 50))), 50)
        with self.assertRaises(ValueError):
            trial_seeds(3, 0)

    def test_experiment_runs_one_trial_per_seed(self):
        def fake_trial(mode, error, seed, db, config):
            return record(TrialOutcome.OBJECT_TOUCHED, seed=seed, mode=mode)

        with mock.patch('apps.sim_harness.experiment.run_trial', side_effect=fake_trial):
            records = run_experiment(VGG, 0, 5, 9, ReferenceDatabase(), CONFIG)
        self.assertEqual([r.seed for r in records], trial_seeds(9, 5))

    def test_matching_cost_is_flat_for_the_weighted_subset(self):
        rng = np.random.default_rng(0)
        db = ReferenceDatabase()
        for i in range(30):
            kps = [Keypoint(PixelCoord(int(r), int(c)), rng.normal(size=16), 2.0)
                   for r, c in rng.integers(0, 400, (20, 2))]
            db.insert(TARGET_OBJECT, kps)
        frame_kps = [Keypoint(PixelCoord(int(r), int(c)), rng.normal(size=16), 2.0)
                     for r, c in rng.integers(0, 400, (40, 2))]
        videos = [[RecordedFrame([WholeImage(), WholeImage()], frame_kps) for _ in range(5)]]

        prob = bench_matching(db, [10, 30], 'prob', videos, CONFIG)
        every = bench_matching(db, [10, 30], 'all', videos, CONFIG)
        self.assertTrue((prob['max_invocations'] <= CONFIG.refdb.subset_size * 2).all())
        self.assertEqual(every['mean_invocations'].tolist(), [20.0, 60.0])
        self.assertEqual(every['mean_rois'].tolist(), [2.0, 2.0])

    def test_database_prefix(self):
        db = build_reference_db(CONFIG, n_views=1, seed=3)
        prefix = database_prefix(db, 2)
        self.assertEqual(len(prefix), 2)
        assert_allclose(prefix.weights, [0.5, 0.5])
        with self.assertRaises(ValueError):
            database_prefix(db, 6)


class ConfigTests(SimpleTestCase):

    def test_defaults_file_matches_built_in_defaults(self):
        self.assertEqual(load_pipeline_config(settings.GRASP_CONFIG_FILE), PipelineConfig())

    def test_simulator_segmentation_without_a_file(self):
        segmentation = build_pipeline_config({}).segmentation
        self.assertEqual((segmentation.t2, segmentation.dilate_close_r), (0.2, 3))

    def test_file_values_override_the_simulator_segmentation(self):
        segmentation = build_pipeline_config({'t2': '0.6', 'dilate_close_r': '2'}).segmentation
        self.assertEqual((segmentation.t2, segmentation.dilate_close_r), (0.6, 2))

    def test_colors_parse_from_text(self):
        serializer = SceneConfigSerializer(data={'table_color': '10, 20, 30'})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        self.assertEqual(serializer.save().table_color, (10, 20, 30))

    def test_rejects_bad_color(self):
        with self.assertRaises(ValidationError):
            build_pipeline_config({'floor_color': '300,0,0'})

    def test_rejects_empty_table(self):
        with self.assertRaises(ValidationError):
            build_pipeline_config({'table_x_min': '1.0', 'table_x_max': '0.5'})

    def test_missing_file(self):
        with self.assertRaises(FileNotFoundError):
            load_pipeline_config('/nonexistent/params.cfg')


class ExperimentApiTests(TestCase):

    def setUp(self):
        self.client = APIClient()
        self.run = ExperimentRun.objects.create(
            mode='vgg', model_error_mm=40, trials=3, seed=1, success_count=2, failure_count=1,
        )
        for seed, outcome, time in [(1, 'ObjectTouched', 1.2), (2, 'ObjectNotTouched', 0.8),
                                    (3, 'ObjectNotDetected', None)]:
            TrialResult.objects.create(run=self.run, seed=seed, outcome=outcome, convergence_time_s=time)

    def test_list(self):
        response = self.client.get('/api/experiments/')
        self.assertEqual(response.status_code, 200)
        self.assertEqual(response.data['count'], 1)
        self.assertAlmostEqual(response.data['results'][0]['success_frequency'], 2 / 3)

    def test_detail_has_outcome_table_and_histogram(self):
        response = self.client.get(f'/api/experiments/{self.run.pk}/')
        self.assertEqual(response.status_code, 200)
        table = {row['outcome']: row['count'] for row in response.data['outcome_table']}
        self.assertEqual(table['ObjectTouched'], 1)
        self.assertEqual(table['ObjectNotDetected'], 1)
        self.assertEqual(len(table), 6)
        self.assertEqual(sum(row['count'] for row in response.data['convergence_histogram']), 2)

    def test_trials(self):
        response = self.client.get(f'/api/experiments/{self.run.pk}/trials/')
        self.assertEqual(response.status_code, 200)
        self.assertEqual([row['seed'] for row in response.data['results']], [1, 2, 3])
        self.assertTrue(response.data['results'][0]['success'])

    def test_missing_experiment(self):
        self.assertEqual(self.client.get('/api/experiments/999/').status_code, 404)

    def test_read_only(self):
        self.assertEqual(self.client.post('/api/experiments/', {}).status_code, 405)


class CommandTests(TestCase):

    def test_histogram_command(self):
        with tempfile.TemporaryDirectory() as tmp:
            source, out = Path(tmp) / 'results.csv', Path(tmp) / 'hist.csv'
            records = [record(TrialOutcome.OBJECT_TOUCHED, time=0.4), record(TrialOutcome.OBJECT_NOT_DETECTED)]
            write_results_csv(records_frame(records), source)
            stdout = StringIO()
            call_command('histogram', '--in', str(source), '--out', str(out), stdout=stdout)
            histogram = pd.read_csv(out)
        self.assertEqual(histogram['count'].sum(), 1)
        self.assertIn('written', stdout.getvalue())

    def test_histogram_rejects_missing_columns(self):
        with tempfile.TemporaryDirectory() as tmp:
            source = Path(tmp) / 'results.csv'
            pd.DataFrame({'seed': [1]}).to_csv(source, index=False)
            with self.assertRaises(CommandError):
                call_command('histogram', '--in', str(source), '--out', str(Path(tmp) / 'hist.csv'))

    def test_run_trials_stores_the_run(self):
        db = ReferenceDatabase()
        db.insert(TARGET_OBJECT, [Keypoint(PixelCoord(1, 1), np.zeros(16))])
        records = [record(TrialOutcome.OBJECT_TOUCHED, seed=1), record(TrialOutcome.GRIPPER_LOST, seed=2)]
        command = 'apps.sim_harness.management.commands.run_trials'
        with tempfile.TemporaryDirectory() as tmp, \
                mock.patch(f'{command}.load_database', return_value=db), \
                mock.patch(f'{command}.run_experiment', return_value=records):
            out = Path(tmp) / 'results.csv'
            call_command('run_trials', '--mode', 'vgg', '--trials', '2', '--out', str(out), stdout=StringIO())
            self.assertEqual(len(pd.read_csv(out)), 2)

        run = ExperimentRun.objects.get()
        self.assertEqual((run.success_count, run.failure_count), (1, 1))
        self.assertEqual(list(run.results.values_list('outcome', flat=True)), ['ObjectTouched', 'GripperLost'])

    def test_run_trials_needs_target_references(self):
        with mock.patch('apps.sim_harness.management.commands.run_trials.load_database',
                        return_value=ReferenceDatabase()):
            with self.assertRaises(CommandError):
                call_command('run_trials', '--mode', 'nvgg', '--no-store', stdout=StringIO())
