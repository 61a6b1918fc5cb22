import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose

from .camera import (
    BehindCamera, CameraModel, InvalidDepth, PixelCoord,
    back_project, back_project_pixels, project, project_points,
)
from .transforms import InvalidTransform, RigidTransform, compose, rot_x, rot_y, rot_z


def random_transform(rng):
    angles = rng.uniform(-np.pi, np.pi, size=3)
    rotation = rot_z(angles[0]) @ rot_y(angles[1]) @ rot_x(angles[2])
    return RigidTransform(rotation, rng.normal(size=3))


def tilted_camera():
    pose = RigidTransform(rot_z(-np.pi / 2), [0.05, 0.0, 1.30])
    return CameraModel(525.0, 525.0, 319.5, 239.5, 640, 480, pose, pan=0.2, tilt=-0.9)


class RigidTransformTests(SimpleTestCase):

    def test_compose_with_identity(self):
        t = random_transform(np.random.default_rng(1))
        result = compose(RigidTransform.identity(), t)
        assert_allclose(result.as_matrix(), t.as_matrix(), atol=1e-12)

    def test_compose_with_inverse_is_identity(self):
        t = random_transform(np.random.default_rng(2))
        assert_allclose(compose(t, t.inverse()).as_matrix(), np.eye(4), atol=1e-9)

    def test_compose_matches_matrix_product(self):
        a = RigidTransform(rot_z(np.pi / 2), [1.0, 0.0, 0.0])
        b = RigidTransform(rot_x(0.3), [0.0, 2.0, -1.0])
        expected = a.as_matrix() @ b.as_matrix()
        assert_allclose(compose(a, b).as_matrix(), expected, atol=1e-12)
        # (1, 0, 0) rotated a quarter turn about z, then shifted by (1, 0, 0)
        assert_allclose(a.apply([1.0, 0.0, 0.0]), [1.0, 1.0, 0.0], atol=1e-12)
        assert_allclose(compose(a, RigidTransform.identity()).apply(np.zeros(3)), [1.0, 0.0, 0.0])

    def test_compose_is_associative(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            a, b, c = (random_transform(rng) for _ in range(3))
            left = compose(compose(a, b), c).as_matrix()
            right = compose(a, compose(b, c)).as_matrix()
            assert_allclose(left, right, atol=1e-9)

    def test_long_composition_chain_stays_orthonormal(self):
        rng = np.random.default_rng(4)
        steps = [random_transform(rng) for _ in range(16)]
        current = RigidTransform.identity()
        for i in range(10_000):
            current = compose(current, steps[i % len(steps)])
            if i % 1000 == 999:
                current = current.orthonormalized()
        r = current.rotation
        assert_allclose(r.T @ r, np.eye(3), atol=1e-9)
        self.assertAlmostEqual(np.linalg.det(r), 1.0, places=9)

    def test_rejects_reflection(self):
        with self.assertRaises(InvalidTransform):
            RigidTransform(np.diag([1.0, 1.0, -1.0]))

    def test_arrays_are_read_only(self):
        t = RigidTransform.from_translation(1, 2, 3)
        with self.assertRaises(ValueError):
            t.translation[0] = 5.0


class ProjectionTests(SimpleTestCase):

    def setUp(self):
        self.cam = CameraModel(500.0, 500.0, 320.0, 240.0, 640, 480)
        self.to_world = self.cam.world_from_camera()

    def test_principal_point(self):
        p = self.to_world.apply([0.0, 0.0, 1.0])
        self.assertEqual(project(self.cam, p), PixelCoord(240, 320))

    def test_pinhole_formula(self):
        p = self.to_world.apply([0.1, 0.0, 1.0])
        self.assertEqual(project(self.cam, p).col, 370)

    def test_behind_camera(self):
        p = self.to_world.apply([0.0, 0.0, -0.5])
        with self.assertRaises(BehindCamera):
            project(self.cam, p)
        _, _, _, in_front = project_points(self.cam, p)
        self.assertFalse(in_front[0])

    def test_back_project_principal_point(self):
        p = back_project(self.cam, PixelCoord(240, 320), 1000)
        assert_allclose(p, self.to_world.apply([0.0, 0.0, 1.0]), atol=1e-12)

    def test_back_project_rejects_zero_depth(self):
        with self.assertRaises(InvalidDepth):
            back_project(self.cam, PixelCoord(10, 10), 0)

    def test_round_trip_on_random_pixels(self):
        cam = tilted_camera()
        rng = np.random.default_rng(5)
        for _ in range(100):
            px = PixelCoord(int(rng.integers(0, 480)), int(rng.integers(0, 640)))
            depth = int(rng.integers(300, 9000))
            self.assertEqual(project(cam, back_project(cam, px, depth)), px)

    def test_vectorised_round_trip(self):
        cam = tilted_camera()
        rng = np.random.default_rng(6)
        rows = rng.integers(0, 480, size=200)
        cols = rng.integers(0, 640, size=200)
        depth = rng.integers(300, 9000, size=200)
        points = back_project_pixels(cam, rows, cols, depth)
        r, c, z, in_front = project_points(cam, points)
        self.assertTrue(in_front.all())
        assert_allclose(r, rows, atol=1e-6)
        assert_allclose(c, cols, atol=1e-6)
        assert_allclose(z, depth / 1000.0, atol=1e-9)

    def test_aimed_at_centres_the_point(self):
        cam = tilted_camera()
        target = np.array([0.45, 0.1, 0.8])
        aimed = cam.aimed_at(target)
        rows, cols, _, _ = project_points(aimed, target)
        self.assertAlmostEqual(rows[0], aimed.cy, places=6)
        self.assertAlmostEqual(cols[0], aimed.cx, places=6)

    def test_shifted_camera_shifts_back_projection(self):
        cam = tilted_camera()
        offset = np.array([0.03, -0.02, 0.01])
        px = PixelCoord(100, 200)
        assert_allclose(
            back_project(cam.shifted(offset), px, 800),
            back_project(cam, px, 800) + offset,
            atol=1e-12,
        )
