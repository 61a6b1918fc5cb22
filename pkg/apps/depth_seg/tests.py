import tempfile
from collections import deque
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase
from numpy.testing import assert_allclose, assert_array_equal
from rest_framework.exceptions import ValidationError

from apps.geometry.camera import CameraModel
from config.params import build_params

from .derivatives import HORIZONTAL, VERTICAL, derivative_1, derivative_2, derivative_kernel
from .images import DepthImage, read_depth_pgm, write_depth_pgm
from .segmentation import (
    SegmentationService, SegParams, dilate, edge_layers, extract_rois, floodfill,
)
from .serializers import SegParamsSerializer

CAMERA = CameraModel(525.0, 525.0, 319.5, 239.5, 640, 480)


def row_image(values, rows=3):
    return DepthImage(np.tile(np.asarray(values, dtype=np.uint16), (rows, 1)))


def box_scene(top=160, left=300, height=150, width=44, near=700, far=1000):
    data = np.full((480, 640), far, dtype=np.uint16)
    data[top:top + height, left:left + width] = near
    truth = np.zeros((480, 640), dtype=bool)
    truth[top:top + height, left:left + width] = True
    return DepthImage(data), truth


def bfs_labels(free):
    labels = np.zeros(free.shape, dtype=int)
    current = 0
    for start in zip(*np.nonzero(free)):
        if labels[start]:
            continue
        current += 1
        labels[start] = current
        queue = deque([start])
        while queue:
            r, c = queue.popleft()
            for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                nr, nc = r + dr, c + dc
                if 0 <= nr < free.shape[0] and 0 <= nc < free.shape[1] and free[nr, nc] and not labels[nr, nc]:
                    labels[nr, nc] = current
                    queue.append((nr, nc))
    return labels, current


class DerivativeTests(SimpleTestCase):

    def test_kernel_shape(self):
        assert_array_equal(derivative_kernel(3), [-1, 0, 0, 0, 0, 0, 1])
        with self.assertRaises(ValueError):
            derivative_kernel(0)

    def test_step_response(self):
        d1 = derivative_1(row_image([500, 500, 800, 800]), 1, HORIZONTAL)
        self.assertEqual(d1[1, 1], 150.0)
        self.assertEqual(d1[1, 2], 150.0)
        self.assertTrue(np.isnan(d1[1, 0]))
        self.assertTrue(np.isnan(d1[1, 3]))

    def test_constant_image_has_zero_derivative(self):
        img = DepthImage(np.full((20, 20), 900, dtype=np.uint16))
        for direction in (HORIZONTAL, VERTICAL):
            d1 = derivative_1(img, 3, direction)
            inner = d1[3:-3, 3:-3]
            assert_array_equal(inner, np.zeros_like(inner))

    def test_invalid_end_tap_gives_nan(self):
        d1 = derivative_1(row_image([500, 0, 800, 800]), 1, HORIZONTAL)
        self.assertTrue(np.isnan(d1[1, 2]))
        # the center tap is not used
        self.assertEqual(d1[1, 1], 150.0)

    def test_crease_has_second_derivative_peak(self):
        d1 = derivative_1(row_image([500, 500, 500, 520, 540, 560]), 1, HORIZONTAL)
        d2 = derivative_2(d1, 1, HORIZONTAL)
        self.assertGreater(d2[1, 2], 0)
        self.assertEqual(np.nanargmax(d2[1]), 2)

    def test_linear_ramp_has_zero_second_derivative(self):
        ramp = np.tile(np.arange(600, 900, 5, dtype=np.uint16), (5, 1))
        d1 = derivative_1(DepthImage(ramp), 3, HORIZONTAL)
        d2 = derivative_2(d1, 6, HORIZONTAL)
        assert_allclose(d1[0, 3:-3], 5.0)
        assert_allclose(d2[0, 9:-9], 0.0)

    def test_vertical_direction(self):
        img = DepthImage(np.array([[500] * 3, [500] * 3, [800] * 3, [800] * 3], dtype=np.uint16))
        self.assertEqual(derivative_1(img, 1, VERTICAL)[1, 1], 150.0)

    def test_mirrored_input_negates_first_derivative_only(self):
        data = np.random.default_rng(5).integers(400, 1200, size=(24, 30)).astype(np.uint16)
        data[4, 7] = 0
        data[15, 22] = 0
        for direction, flip in ((HORIZONTAL, np.fliplr), (VERTICAL, np.flipud)):
            d1 = derivative_1(DepthImage(data), 2, direction)
            d1_mirror = derivative_1(DepthImage(np.ascontiguousarray(flip(data))), 2, direction)
            assert_allclose(d1_mirror, -flip(d1), atol=1e-9)
            assert_array_equal(np.isnan(d1_mirror), flip(np.isnan(d1)))

            d2 = derivative_2(d1, 3, direction)
            d2_mirror = derivative_2(d1_mirror, 3, direction)
            assert_allclose(d2_mirror, flip(d2), atol=1e-9)
            assert_array_equal(np.isnan(d2_mirror), flip(np.isnan(d2)))
            # an invalid pixel spoils every output whose end taps reach it
            self.assertTrue(np.isnan(d2).sum() > np.isnan(d1).sum())

    def test_image_smaller_than_kernel(self):
        with self.assertRaises(ValueError):
            derivative_1(row_image([500, 500, 500]), 3, HORIZONTAL)


class EdgeTests(SimpleTestCase):

    def test_jump_is_first_derivative_edge_without_crease_nearby(self):
        data = np.full((40, 40), 700, dtype=np.uint16)
        data[:, 20:] = 1000
        params = SegParams(t1=40)
        jumps, creases = edge_layers(DepthImage(data), params)
        self.assertTrue(jumps[20, 17:23].all())
        self.assertFalse(creases[:, 10:30].any())

    def test_crease_mask_avoids_dilated_jump_mask(self):
        rng = np.random.default_rng(7)
        params = SegParams()
        for _ in range(10):
            data = rng.integers(600, 700, size=(60, 60)).astype(np.uint16)
            data[20:40, 15:45] += 300
            jumps, creases = edge_layers(DepthImage(data), params)
            overlap = creases & dilate(jumps, params.dilate_mask_r)
            self.assertFalse(overlap.any())

    def test_flat_plane_has_no_edges(self):
        img = DepthImage(np.full((100, 100), 1000, dtype=np.uint16))
        self.assertEqual(SegmentationService.segment(img, CameraModel(100, 100, 50, 50, 100, 100), SegParams()).edges.count(), 0)


class FloodfillTests(SimpleTestCase):

    def test_matches_breadth_first_search(self):
        rng = np.random.default_rng(8)
        for _ in range(5):
            free = rng.random((40, 50)) < 0.6
            labels, stats = floodfill(free)
            expected, count = bfs_labels(free)
            self.assertEqual(len(stats) - 1, count)
            pairs = set(zip(labels[free].tolist(), expected[free].tolist()))
            self.assertEqual(len(pairs), count)
            assert_array_equal(labels[~free], 0)


class ExtractRoisTests(SimpleTestCase):

    def test_single_box_is_one_roi(self):
        img, truth = box_scene()
        rois = extract_rois(img, CAMERA, SegParams())
        self.assertEqual(len(rois), 1)
        roi = rois[0]
        self.assertGreaterEqual(roi.iou(truth), 0.6)
        self.assertTrue(truth[roi.mask].all())
        self.assertAlmostEqual(roi.metric_width, 34 * 0.7 / 525, delta=0.002)
        self.assertAlmostEqual(roi.median_depth_mm, 700.0)
        self.assertTrue(roi.contains([200], [320])[0])
        self.assertFalse(roi.contains([10, -5], [10, 700]).any())

    def test_principal_axis_follows_longest_side(self):
        img, _ = box_scene()
        roi = extract_rois(img, CAMERA, SegParams())[0]
        rows_dir = CAMERA.world_from_camera().apply_rotation([0.0, 1.0, 0.0])
        self.assertGreater(abs(float(np.dot(roi.principal_axis, rows_dir))), 0.99)
        self.assertAlmostEqual(np.linalg.norm(roi.principal_axis), 1.0)

    def test_flat_table_has_no_roi(self):
        img = DepthImage(np.full((480, 640), 1000, dtype=np.uint16))
        self.assertEqual(extract_rois(img, CAMERA, SegParams()), [])

    def test_all_invalid_has_no_roi(self):
        self.assertEqual(extract_rois(DepthImage.blank(480, 640), CAMERA, SegParams()), [])

    def test_size_mismatch_rejects_roi(self):
        img, _ = box_scene()
        params = SegParams(size_tol=0.2).for_object(0.30, 0.30)
        self.assertEqual(extract_rois(img, CAMERA, params), [])

    def test_small_regions_are_dropped(self):
        img, _ = box_scene(height=14, width=14)
        self.assertEqual(extract_rois(img, CAMERA, SegParams(size_tol=0.99)), [])

    def test_camera_shape_must_match(self):
        img, _ = box_scene()
        with self.assertRaises(ValueError):
            extract_rois(img, CameraModel(525.0, 525.0, 100.0, 100.0, 320, 240), SegParams())


class DepthFileTests(SimpleTestCase):

    def test_pgm_keeps_sixteen_bit_depth(self):
        img, _ = box_scene()
        with tempfile.TemporaryDirectory() as tmp:
            path = write_depth_pgm(img, Path(tmp) / 'depth.pgm')
            assert_array_equal(read_depth_pgm(path).data, img.data)

    def test_depth_image_rejects_out_of_range(self):
        with self.assertRaises(ValueError):
            DepthImage(np.full((4, 4), 12_000))


class SegParamsSerializerTests(SimpleTestCase):

    def test_defaults(self):
        self.assertEqual(build_params(SegParamsSerializer), SegParams())

    def test_file_values_override_and_unknown_keys_are_ignored(self):
        params = build_params(SegParamsSerializer, {'t2': '0.25', 'ratio': '0.8'})
        self.assertEqual(params.t2, 0.25)

    def test_rejects_bad_kernel(self):
        with self.assertRaises(ValidationError):
            build_params(SegParamsSerializer, {'k1': '0'})

    def test_rejects_zero_thresholds(self):
        for name in ('t1', 't2'):
            with self.assertRaises(ValidationError):
                build_params(SegParamsSerializer, {name: '0'})
            with self.assertRaises(ValueError):
                SegParams(**{name: 0.0})

    def test_size_tolerance_lies_strictly_inside_unit_interval(self):
        for value in ('0', '1', '100'):
            with self.assertRaises(ValidationError):
                build_params(SegParamsSerializer, {'size_tol': value})
        for value in (0.0, 1.0, 100.0):
            with self.assertRaises(ValueError):
                SegParams(size_tol=value)
        self.assertEqual(build_params(SegParamsSerializer, {'size_tol': '0.99'}).size_tol, 0.99)


class SegmentCommandTests(SimpleTestCase):

    def test_writes_edges_and_one_mask_per_region(self):
        img, _ = box_scene()
        with tempfile.TemporaryDirectory() as tmp:
            path = write_depth_pgm(img, Path(tmp) / 'depth.pgm')
            stdout = StringIO()
            call_command('segment', str(path), '--out', tmp, stdout=stdout)
            self.assertTrue((Path(tmp) / 'edges.pgm').is_file())
            self.assertTrue((Path(tmp) / 'roi_0.pgm').is_file())
            self.assertFalse((Path(tmp) / 'roi_1.pgm').exists())
        self.assertIn('1 region(s)', stdout.getvalue())

    def test_rejects_image_of_the_wrong_size(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_depth_pgm(DepthImage(np.full((240, 320), 900, dtype=np.uint16)), Path(tmp) / 'small.pgm')
            with self.assertRaises(CommandError):
                call_command('segment', str(path), '--out', tmp, stdout=StringIO())

    def test_missing_file(self):
        with self.assertRaises(CommandError):
            call_command('segment', '/nonexistent/depth.pgm', stdout=StringIO())
