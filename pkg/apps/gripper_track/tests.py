import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose
from rest_framework.exceptions import ValidationError

from apps.depth_seg.images import ColorImage, DepthImage
from apps.geometry.camera import CameraModel, project_points
from apps.geometry.transforms import RigidTransform, rot_z, vec3
from config.params import build_params

from .detection import combine_fingers, detect_finger, finger_debug_image
from .kalman import TrackerParams, TrackerState, kalman_step, predict
from .serializers import GripperGeometrySerializer, TrackerParamsSerializer
from .servo import GripperServo, servo_correction
from .spaces import LEFT, RIGHT, GripperGeometry, NoVisibleRegion, finger_space, roi_from_space

CAM = CameraModel(525.0, 525.0, 319.5, 239.5, 640, 480)
# Wide opening so that a 4 cm arm error never pushes a finger into the other finger's space.
GEOM = GripperGeometry(
    gripper_width=0.14, finger_width=0.015, finger_thickness=0.01, finger_length=0.07, arm_error_margin=0.045
)
SMALL = GripperGeometry(0.10, 0.02, 0.01, 0.05, 0.03)


def gripper_at(center, geom=GEOM):
    """Gripper aligned with the world axes whose grasp centre is at ``center``."""
    return RigidTransform.from_translation(vec3(center) - geom.grasp_center())


def render_fingers(pose, geom=GEOM, cam=CAM, sides=(LEFT, RIGHT)):
    """Front faces of the fingers, seen by CAM (looking down world +y), over a white wall."""
    rows, cols = np.mgrid[0:cam.height, 0:cam.width]
    depth = np.full(cam.shape, 1500, dtype=np.uint16)
    color = np.full(cam.shape + (3,), 230, dtype=np.uint8)
    for side in sides:
        c = pose.apply(geom.finger_center(side))
        z = c[1] - geom.finger_thickness / 2
        x = (cols - cam.cx) * z / cam.fx
        up = -(rows - cam.cy) * z / cam.fy
        face = (np.abs(x - c[0]) <= geom.finger_width / 2) & (np.abs(up - c[2]) <= geom.finger_length / 2)
        depth[face] = round(z * 1000)
        color[face] = 20
    return color, depth


def images(color, depth):
    return ColorImage(color), DepthImage(depth)


class FingerSpaceTests(SimpleTestCase):

    def test_hand_evaluated_ranges(self):
        space = finger_space(SMALL, LEFT)
        assert_allclose(space.lower, [-0.09, -0.035, -0.08], atol=1e-12)
        assert_allclose(space.upper, [-0.01, 0.035, 0.03], atol=1e-12)

    def test_zero_margin_is_the_finger(self):
        geom = GripperGeometry(0.10, 0.02, 0.01, 0.05, 0.0)
        space = finger_space(geom, LEFT)
        assert_allclose(space.lower, [-0.06, -0.005, -0.05])
        assert_allclose(space.upper, [-0.04, 0.005, 0.0])

    def test_sides_are_mirrored(self):
        left, right = finger_space(SMALL, LEFT), finger_space(SMALL, RIGHT)
        assert_allclose(right.lower[0], -left.upper[0])
        assert_allclose(right.upper[0], -left.lower[0])
        assert_allclose(right.lower[1:], left.lower[1:])
        assert_allclose(right.upper[1:], left.upper[1:])

    def test_margin_encloses_nominal_finger(self):
        nominal = GripperGeometry(0.10, 0.02, 0.01, 0.05, 0.0)
        for side in (LEFT, RIGHT):
            self.assertTrue(finger_space(SMALL, side).encloses(finger_space(nominal, side)))

    def test_rejects_unknown_side(self):
        with self.assertRaises(ValueError):
            finger_space(SMALL, 0)


class RoiTests(SimpleTestCase):

    def test_centered_box_is_centered_on_principal_point(self):
        space = finger_space(SMALL, LEFT)
        center = (space.lower + space.upper) / 2
        pose = RigidTransform.from_translation(vec3(0.0, 1.0, 0.0) - center)
        region = roi_from_space(space, pose, CAM)
        self.assertAlmostEqual((region.col_min + region.col_max) / 2, CAM.cx, delta=1.0)
        self.assertAlmostEqual((region.row_min + region.row_max) / 2, CAM.cy, delta=1.0)

    def test_rectangle_matches_projected_corners(self):
        space = finger_space(GEOM, RIGHT)
        pose = RigidTransform(rot_z(0.3), vec3(-0.05, 0.6, 0.02))
        region = roi_from_space(space, pose, CAM)
        rows, cols, _, _ = project_points(CAM, pose.apply(space.corners()))
        self.assertLessEqual(abs(region.col_min - cols.min()), 1.0)
        self.assertLessEqual(abs(region.col_max - cols.max()), 1.0)
        self.assertLessEqual(abs(region.row_min - rows.min()), 1.0)
        self.assertLessEqual(abs(region.row_max - rows.max()), 1.0)

    def test_polygon_mask_lies_inside_rectangle(self):
        region = roi_from_space(finger_space(GEOM, LEFT), gripper_at((0.0, 0.5, 0.0)), CAM)
        mask = region.polygon_mask()
        self.assertEqual(mask.shape, region.shape)
        self.assertTrue(0 < mask.sum() <= region.pixel_count)

    def test_behind_camera(self):
        with self.assertRaises(NoVisibleRegion):
            roi_from_space(finger_space(GEOM, LEFT), gripper_at((0.0, -1.0, 0.0)), CAM)

    def test_outside_image(self):
        with self.assertRaises(NoVisibleRegion):
            roi_from_space(finger_space(GEOM, LEFT), gripper_at((3.0, 0.5, 0.0)), CAM)


class DetectFingerTests(SimpleTestCase):

    def setUp(self):
        self.pose = gripper_at((0.0, 0.5, 0.0))

    def test_visible_finger_is_found_near_its_centroid(self):
        color, depth = images(*render_fingers(self.pose))
        for side in (LEFT, RIGHT):
            found = detect_finger(color, depth, finger_space(GEOM, side), self.pose, CAM)
            self.assertIsNotNone(found)
            self.assertLess(np.linalg.norm(found.position - self.pose.apply(GEOM.finger_center(side))), 0.01)

    def test_cheap_checks_run_first(self):
        color, depth = images(*render_fingers(self.pose))
        counts = detect_finger(color, depth, finger_space(GEOM, LEFT), self.pose, CAM).stage_counts
        self.assertGreaterEqual(counts['rectangle'], counts['polygon'])
        self.assertGreaterEqual(counts['polygon'], counts['black'])
        self.assertGreaterEqual(counts['black'], counts['box'])

    def test_occluded_finger(self):
        color, depth = render_fingers(self.pose)
        color[:, :320] = 128
        depth[:, :320] = 300
        found = detect_finger(*images(color, depth), finger_space(GEOM, LEFT), self.pose, CAM)
        self.assertIsNone(found)

    def test_all_white_image(self):
        color = np.full(CAM.shape + (3,), 255, dtype=np.uint8)
        depth = np.full(CAM.shape, 495, dtype=np.uint16)
        self.assertIsNone(detect_finger(*images(color, depth), finger_space(GEOM, LEFT), self.pose, CAM))

    def test_black_pixels_outside_the_box_are_ignored(self):
        color, depth = render_fingers(self.pose)
        color[:] = 0
        depth[:] = 1500
        self.assertIsNone(detect_finger(*images(color, depth), finger_space(GEOM, LEFT), self.pose, CAM))

    def test_result_always_inside_the_queried_box(self):
        rng = np.random.default_rng(1)
        for _ in range(30):
            offset = rng.uniform(-0.06, 0.06, 3)
            truth = gripper_at(np.array([0.0, 0.5, 0.0]) + offset)
            color, depth = images(*render_fingers(truth))
            for side in (LEFT, RIGHT):
                space = finger_space(GEOM, side)
                found = detect_finger(color, depth, space, self.pose, CAM)
                if found is not None:
                    self.assertTrue(space.contains(self.pose.inverse().apply(found.position))[0])

    def test_image_size_mismatch(self):
        color = np.zeros((10, 10, 3), dtype=np.uint8)
        depth = np.zeros((10, 10), dtype=np.uint16)
        with self.assertRaises(ValueError):
            detect_finger(*images(color, depth), finger_space(GEOM, LEFT), self.pose, CAM)

    def test_debug_image_marks_finger_white(self):
        color, depth = render_fingers(self.pose)
        debug = finger_debug_image(DepthImage(depth), finger_space(GEOM, LEFT), self.pose, CAM)
        col = int(round(CAM.cx - 0.07 * CAM.fx / 0.495))
        assert_allclose(debug[int(CAM.cy), col], [255, 255, 255])
        self.assertLess(int(debug[0, 0].sum()), 3 * 255)


class CombineFingersTests(SimpleTestCase):

    def test_midpoint_of_two_fingers(self):
        g = combine_fingers((-0.05, 0, 0), (0.05, 0, 0), SMALL, np.eye(3), 0.02)
        assert_allclose(g, [0.0, 0.0, 0.0])

    def test_rejects_wrong_separation(self):
        self.assertIsNone(combine_fingers((-0.05, 0, 0), (0.09, 0, 0), SMALL, np.eye(3), 0.02))

    def test_single_finger_offset(self):
        assert_allclose(combine_fingers((-0.05, 0, 0), None, SMALL, np.eye(3)), [0.0, 0.0, 0.0])
        assert_allclose(combine_fingers(None, (0.05, 0, 0), SMALL, np.eye(3)), [0.0, 0.0, 0.0])

    def test_single_finger_offset_follows_orientation(self):
        g = combine_fingers((0.0, -0.05, 0.0), None, SMALL, rot_z(np.pi / 2))
        assert_allclose(g, [0.0, 0.0, 0.0], atol=1e-12)

    def test_no_fingers(self):
        self.assertIsNone(combine_fingers(None, None, SMALL, np.eye(3)))


class KalmanTests(SimpleTestCase):

    def test_updates_shrink_the_predicted_covariance(self):
        rng = np.random.default_rng(2)
        state = TrackerState.initial((0.0, 0.0, 0.0))
        for _ in range(20):
            _, predicted = predict(state, 0.1)
            state = kalman_step(state, 0.1, rng.normal(0, 0.005, 3))
            self.assertLess(state.uncertainty, np.trace(predicted))

    def test_failure_inflates_covariance(self):
        state = TrackerState.initial((0.0, 0.0, 0.0))
        _, predicted = predict(state, 0.1)
        self.assertGreater(kalman_step(state, 0.1, None).uncertainty, np.trace(predicted))

    def test_exact_measurements_converge(self):
        m = np.array([0.1, 0.2, 0.3])
        state = TrackerState.initial((0.0, 0.0, 0.0), TrackerParams(process_noise=0.0))
        for _ in range(200):
            state = kalman_step(state, 0.1, m)
        assert_allclose(state.position, m, atol=1e-3)

    def test_covariance_stays_positive_definite(self):
        rng = np.random.default_rng(3)
        state = TrackerState.initial(rng.normal(size=3))
        for _ in range(10_000):
            measurement = None if rng.random() < 0.2 else rng.normal(0, 0.01, 3)
            state = kalman_step(state, rng.uniform(0.01, 0.2), measurement)
            P = state.covariance
            self.assertLessEqual(np.abs(P - P.T).max(), 1e-9)
            self.assertGreater(np.linalg.eigvalsh(P).min(), 0.0)

    def test_rejects_non_positive_dt(self):
        with self.assertRaises(ValueError):
            kalman_step(TrackerState.initial((0, 0, 0)), 0.0, None)

    def test_params_validation(self):
        with self.assertRaises(ValueError):
            TrackerParams(inflation=1.0)


def settled(position, params=None):
    params = params or TrackerParams()
    return TrackerState(np.concatenate([vec3(position), np.zeros(3)]), np.eye(6) * 1e-6, params)


class ServoTests(SimpleTestCase):

    def test_no_error_keeps_command(self):
        command = servo_correction(settled((0.1, 0.2, 0.3)), (0.5, 0.0, 0.8), (0.1, 0.2, 0.3), 1.0)
        self.assertFalse(command.hold)
        assert_allclose(command.target, [0.5, 0.0, 0.8])
        assert_allclose(command.gaze, [0.1, 0.2, 0.3])

    def test_command_opposes_observed_error(self):
        command = servo_correction(settled((0.03, 0.0, 0.0)), (0.0, 0.0, 0.0), (0.0, 0.0, 0.0), 1.0)
        assert_allclose(command.target, [-0.03, 0.0, 0.0])

    def test_hold_when_uncertain(self):
        state = kalman_step(settled((0, 0, 0)), 0.1, None)
        for _ in range(20):
            state = kalman_step(state, 0.1, None)
        command = servo_correction(state, (0, 0, 0), (0, 0, 0))
        self.assertTrue(command.hold)
        self.assertIsNone(command.target)

    def test_closed_loop_cancels_arm_offset(self):
        rng = np.random.default_rng(4)
        target = np.array([0.0, 0.5, 0.0])
        runs, reached = 40, 0
        for _ in range(runs):
            direction = rng.normal(size=3)
            offset = direction / np.linalg.norm(direction) * 0.04 * rng.random() ** (1 / 3)
            servo = GripperServo(GEOM, start=target)
            command = target.copy()
            for _ in range(50):
                color, depth = images(*render_fingers(gripper_at(command + offset)))
                result = servo.step(color, depth, CAM, gripper_at(command), target, dt=0.1)
                if not result.hold:
                    command = result.target
                if np.linalg.norm(command + offset - target) < 0.01:
                    reached += 1
                    break
        self.assertGreaterEqual(reached, int(np.ceil(0.95 * runs)))


class TrackerSerializerTests(SimpleTestCase):

    def test_defaults(self):
        self.assertEqual(build_params(TrackerParamsSerializer), TrackerParams())
        self.assertEqual(build_params(GripperGeometrySerializer), GripperGeometry())

    def test_rejects_inflation_of_one(self):
        with self.assertRaises(ValidationError):
            build_params(TrackerParamsSerializer, {'inflation': '1.0'})

    def test_rejects_fingers_wider_than_opening(self):
        with self.assertRaises(ValidationError):
            build_params(GripperGeometrySerializer, {'finger_width': '0.2'})
