from types import SimpleNamespace

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose

from apps.geometry.camera import PixelCoord

from .descriptors import Keypoint
from .matcher import (
    MatchingParams, MatchResult, ReferenceMatcher, fit_homography, match_descriptors,
    match_reference_to_roi, ransac_homography, reprojection_error,
)


class WholeImage:
    def contains(self, rows, cols):
        return np.ones(len(rows), dtype=bool)


class LeftHalf:
    def contains(self, rows, cols):
        return np.asarray(cols) < 320


def random_keypoints(rng, count, length=16):
    rows = rng.integers(0, 480, size=count)
    cols = rng.integers(0, 640, size=count)
    return [
        Keypoint(PixelCoord(r, c), rng.standard_normal(length), 2.0)
        for r, c in zip(rows, cols)
    ]


def moved(keypoints, d_row, d_col, noise=0.0, rng=None):
    out = []
    for kp in keypoints:
        descriptor = kp.descriptor
        if noise:
            descriptor = descriptor + rng.normal(0.0, noise, size=descriptor.size)
        out.append(Keypoint(PixelCoord(kp.px.row + d_row, kp.px.col + d_col), descriptor, kp.scale))
    return out


def translated_pairs(rng, count, d_row=10, d_col=5):
    pairs = []
    for _ in range(count):
        p = PixelCoord(int(rng.integers(0, 400)), int(rng.integers(0, 600)))
        pairs.append((p, PixelCoord(p.row + d_row, p.col + d_col)))
    return pairs


class MatchDescriptorsTests(SimpleTestCase):

    def test_identical_sets_pair_with_twins(self):
        kps = random_keypoints(np.random.default_rng(1), 30)
        self.assertEqual(match_descriptors(kps, kps), [(i, i) for i in range(30)])

    def test_ratio_test_accepts_clear_winner(self):
        d = np.zeros(16)
        eps = np.full(16, 0.01)
        ref = [Keypoint(PixelCoord(0, 0), d)]
        roi = [Keypoint(PixelCoord(0, 0), d + 10 * eps), Keypoint(PixelCoord(1, 1), d + eps)]
        self.assertEqual(match_descriptors(ref, roi), [(0, 1)])

    def test_ratio_test_rejects_ambiguous_match(self):
        d = np.zeros(16)
        ref = [Keypoint(PixelCoord(0, 0), d)]
        roi = [Keypoint(PixelCoord(0, 0), d + 1.0), Keypoint(PixelCoord(0, 1), d - 1.0)]
        self.assertEqual(match_descriptors(ref, roi), [])

    def test_empty_inputs(self):
        kps = random_keypoints(np.random.default_rng(2), 3)
        self.assertEqual(match_descriptors(kps, []), [])
        self.assertEqual(match_descriptors([], kps), [])

    def test_single_roi_keypoint_passes_ratio_test(self):
        kps = random_keypoints(np.random.default_rng(3), 1)
        self.assertEqual(match_descriptors(kps, kps), [(0, 0)])

    def test_roi_index_is_never_reused(self):
        rng = np.random.default_rng(4)
        ref = random_keypoints(rng, 40)
        roi = random_keypoints(rng, 5)
        pairs = match_descriptors(ref, roi, ratio=1.0)
        roi_indices = [j for _, j in pairs]
        self.assertEqual(len(roi_indices), len(set(roi_indices)))

    def test_closest_reference_keeps_contested_roi_keypoint(self):
        roi = [Keypoint(PixelCoord(0, 0), np.zeros(4))]
        ref = [Keypoint(PixelCoord(0, 0), np.full(4, 0.5)), Keypoint(PixelCoord(0, 0), np.full(4, 0.1))]
        self.assertEqual(match_descriptors(ref, roi), [(1, 0)])

    def test_descriptor_length_mismatch(self):
        rng = np.random.default_rng(5)
        with self.assertRaises(ValueError):
            match_descriptors(random_keypoints(rng, 2, 16), random_keypoints(rng, 2, 8))


class RansacTests(SimpleTestCase):

    def test_pure_translation(self):
        pairs = translated_pairs(np.random.default_rng(6), 20)
        result = ransac_homography(pairs, rng_seed=1)
        self.assertEqual(result.inlier_count, 20)
        src = np.array([(p.col, p.row) for p, _ in pairs], dtype=float)
        assert_allclose(reprojection_error(result.homography, src, src + [5.0, 10.0]), 0.0, atol=0.1)

    def test_translation_with_outliers(self):
        found = 0
        for seed in range(50):
            rng = np.random.default_rng(100 + seed)
            pairs = translated_pairs(rng, 20)
            for _ in range(10):
                pairs.append((
                    PixelCoord(int(rng.integers(0, 480)), int(rng.integers(0, 640))),
                    PixelCoord(int(rng.integers(0, 480)), int(rng.integers(0, 640))),
                ))
            result = ransac_homography(pairs, rng_seed=seed)
            found += result.inlier_count == 20
        self.assertGreaterEqual(found, 49)

    def test_projective_homography_is_recovered(self):
        h = np.array([[1.1, 0.05, 12.0], [-0.03, 0.95, -7.0], [1e-4, -2e-4, 1.0]])
        rng = np.random.default_rng(7)
        src = np.column_stack([rng.uniform(0, 640, 30), rng.uniform(0, 480, 30)])
        homogeneous = np.column_stack([src, np.ones(30)]) @ h.T
        dst = homogeneous[:, :2] / homogeneous[:, 2:3]
        pairs = [
            (PixelCoord(int(round(s[1])), int(round(s[0]))), PixelCoord(int(round(d[1])), int(round(d[0]))))
            for s, d in zip(src, dst)
        ]
        result = ransac_homography(pairs, rng_seed=2)
        self.assertEqual(result.inlier_count, 30)
        src_px = np.array([(p.col, p.row) for p, _ in pairs], dtype=float)
        dst_px = np.array([(q.col, q.row) for _, q in pairs], dtype=float)
        self.assertTrue((reprojection_error(result.homography, src_px, dst_px) < 3.0).all())

    def test_three_pairs_have_no_homography(self):
        result = ransac_homography(translated_pairs(np.random.default_rng(8), 3))
        self.assertIsNone(result.homography)
        self.assertEqual(result.inlier_count, 3)

    def test_collinear_pairs_fall_back_to_translation(self):
        pairs = [(PixelCoord(100, 10 * i), PixelCoord(110, 10 * i + 5)) for i in range(6)]
        result = ransac_homography(pairs, iters=20)
        self.assertEqual(result.inlier_count, 6)
        assert_allclose(result.homography[:2, 2], [5.0, 10.0])

    def test_deterministic_for_seed(self):
        rng = np.random.default_rng(9)
        pairs = translated_pairs(rng, 15) + translated_pairs(rng, 10, d_row=-40, d_col=60)
        a = ransac_homography(pairs, rng_seed=3)
        b = ransac_homography(pairs, rng_seed=3)
        self.assertEqual(a.inlier_count, b.inlier_count)
        assert_allclose(a.homography, b.homography)
        self.assertLessEqual(a.inlier_count, len(pairs))

    def test_result_invariant(self):
        with self.assertRaises(ValueError):
            MatchResult(pairs=((0, 0),), inlier_count=2)
        with self.assertRaises(ValueError):
            MatchResult(pairs=tuple((i, i) for i in range(5)), inlier_count=5)


class MatchReferenceToRoiTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(10)
        self.params = MatchingParams()
        self.ref = SimpleNamespace(keypoints=random_keypoints(self.rng, 40))

    def test_same_view_succeeds(self):
        roi_kps = moved(self.ref.keypoints, 3, -4, noise=0.05, rng=self.rng)
        result = match_reference_to_roi(self.ref, WholeImage(), roi_kps, self.params)
        self.assertTrue(result.success)
        self.assertGreaterEqual(result.inlier_count, self.params.match_min)
        self.assertEqual(result.quality, result.inlier_count)

    def test_unrelated_texture_fails(self):
        roi_kps = random_keypoints(self.rng, 40)
        result = match_reference_to_roi(self.ref, WholeImage(), roi_kps, self.params)
        self.assertFalse(result.success)
        self.assertLess(result.inlier_count, self.params.match_min)

    def test_empty_roi_fails(self):
        result = match_reference_to_roi(self.ref, WholeImage(), [], self.params)
        self.assertFalse(result.success)
        self.assertEqual(result.inlier_count, 0)

    def test_keypoints_outside_region_are_ignored(self):
        roi_kps = moved(self.ref.keypoints, 0, 0)
        result = match_reference_to_roi(self.ref, LeftHalf(), roi_kps, self.params)
        for _, j in result.pairs:
            self.assertLess(roi_kps[j].px.col, 320)


class ReferenceMatcherTests(SimpleTestCase):

    def test_counts_invocations(self):
        rng = np.random.default_rng(11)
        ref = SimpleNamespace(keypoints=random_keypoints(rng, 10))
        matcher = ReferenceMatcher(MatchingParams(), seed=4)
        for _ in range(3):
            matcher.match(ref, WholeImage(), ref.keypoints)
        self.assertEqual(matcher.invocations, 3)
        matcher.reset()
        self.assertEqual(matcher.invocations, 0)


class FitHomographyTests(SimpleTestCase):
    H = np.array([[1.1, 0.05, 12.0], [-0.03, 0.95, -7.0], [1e-4, -2e-4, 1.0]])

    def mapped(self, src):
        homogeneous = np.column_stack([src, np.ones(len(src))]) @ self.H.T
        return homogeneous[:, :2] / homogeneous[:, 2:3]

    def test_four_points_give_the_exact_transform(self):
        src = np.array([[10.0, 20.0], [600.0, 30.0], [580.0, 450.0], [40.0, 400.0]])
        assert_allclose(fit_homography(src, self.mapped(src)), self.H, rtol=1e-3, atol=1e-5)

    def test_least_squares_through_many_points(self):
        rng = np.random.default_rng(10)
        src = np.column_stack([rng.uniform(0, 640, 20), rng.uniform(0, 480, 20)])
        h = fit_homography(src, self.mapped(src))
        self.assertTrue((reprojection_error(h, src, self.mapped(src)) < 0.05).all())
