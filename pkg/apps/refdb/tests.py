import tempfile

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose, assert_array_equal
from rest_framework.exceptions import ValidationError

from apps.geometry.camera import PixelCoord
from apps.matching.descriptors import Keypoint
from config.params import build_params

from .database import InfeasibleBounds, RefDbParams, ReferenceDatabase
from .serializers import RefDbParamsSerializer
from .storage import DatabaseFormatError, keypoint_path, load_database, save_database

FIG4_WEIGHTS = (0.08, 0.13, 0.22, 0.08, 0.08, 0.18, 0.12, 0.11)


def keypoints(rng, count=5, length=16):
    return [
        Keypoint(PixelCoord(int(rng.integers(0, 480)), int(rng.integers(0, 640))), rng.standard_normal(length), 2.5)
        for _ in range(count)
    ]


def filled_db(n, params=None, object_id='object_0'):
    db = ReferenceDatabase()
    for _ in range(n):
        db.insert(object_id, [])
    if params is not None:
        db.apply_params(params)
    return db


class InsertTests(SimpleTestCase):

    def test_first_reference_has_full_weight(self):
        db = filled_db(1)
        assert_allclose(db.weights, [1.0])

    def test_fourth_reference_makes_weights_uniform(self):
        db = filled_db(3)
        ref_id = db.insert('object_1', [])
        self.assertEqual(ref_id, 4)
        assert_allclose(db.weights, [0.25] * 4)

    def test_infeasible_lower_bound(self):
        db = filled_db(3, RefDbParams(weight_min=0.3, weight_max=0.5))
        with self.assertRaises(InfeasibleBounds):
            db.insert('object_0', [])
        self.assertEqual(len(db), 3)

    def test_infeasible_upper_bound_is_rejected(self):
        params = RefDbParams(weight_max=0.3)
        with self.assertRaises(InfeasibleBounds):
            params.bounds_for(3)
        db = filled_db(3)
        with self.assertRaises(InfeasibleBounds):
            db.apply_params(params)
        self.assertEqual(db.params, RefDbParams())
        with self.assertRaises(InfeasibleBounds):
            ReferenceDatabase(params).insert('object_0', [])

    def test_upper_bound_applies_once_feasible(self):
        db = filled_db(4, RefDbParams(weight_max=0.3))
        self.assertEqual(db.M, 0.3)
        db.insert('object_0', [])
        self.assertEqual(db.M, 0.3)
        db.check_invariants()

    def test_rejects_object_id_with_spaces(self):
        with self.assertRaises(ValueError):
            ReferenceDatabase().insert('my object', [])


class ResetTests(SimpleTestCase):

    def test_reset_is_uniform(self):
        for n in (8, 50):
            db = filled_db(n)
            db.update({1}, {2})
            db.reset_uniform()
            assert_allclose(db.weights, np.full(n, 1.0 / n))
            self.assertAlmostEqual(db.weights.sum(), 1.0, places=12)

    def test_reset_of_eight_sums_to_one_exactly(self):
        db = filled_db(8)
        db.update({1}, {2})
        db.reset_uniform()
        self.assertEqual(db.weights.sum(), 1.0)


class SamplingTests(SimpleTestCase):

    def setUp(self):
        self.db = filled_db(8)
        self.db.set_weights(FIG4_WEIGHTS)

    def test_interval_mapping(self):
        picked = self.db.pick_from_uniforms([0.12, 0.25, 0.37, 0.56, 0.92])
        self.assertEqual(picked, [2, 3, 5, 8])

    def test_subset_never_exceeds_database(self):
        uniforms = np.linspace(0.0, 0.999, 200)
        self.assertEqual(self.db.pick_from_uniforms(uniforms), list(range(1, 9)))

    def test_single_reference(self):
        db = filled_db(1)
        self.assertEqual(db.pick_from_uniforms([0.0, 0.5, 0.999]), [1])

    def test_sample_size_is_bounded_by_count(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            self.assertLessEqual(len(self.db.sample_subset(5, rng)), 5)

    def test_pick_frequency_follows_weights(self):
        rng = np.random.default_rng(2)
        draws = 100_000
        ids = self.db.interval_ids(rng.random(draws))
        counts = np.bincount(ids, minlength=9)[1:]
        w = np.array(FIG4_WEIGHTS)
        sigma = np.sqrt(draws * w * (1 - w))
        self.assertTrue((np.abs(counts - draws * w) <= 3 * sigma).all())

    def test_dominant_reference_shrinks_subset(self):
        db = filled_db(10, RefDbParams(weight_min=0.01, weight_max=0.9))
        db.set_weights([0.9] + [0.1 / 9] * 9)
        rng = np.random.default_rng(3)
        sizes = [len(db.sample_subset(5, rng)) for _ in range(10_000)]
        self.assertLess(np.mean(sizes), 3.0)

    def test_object_restricted_sampling(self):
        db = ReferenceDatabase()
        for object_id in ('object_0', 'object_1', 'object_0', 'object_1'):
            db.insert(object_id, [])
        rng = np.random.default_rng(4)
        for _ in range(50):
            self.assertTrue(set(db.sample_subset(3, rng, object_id='object_1')) <= {2, 4})
        self.assertEqual(db.sample_subset(3, rng, object_id='missing'), [])


class UpdateTests(SimpleTestCase):

    def test_worked_example(self):
        db = filled_db(2, RefDbParams(weight_min=0.1, weight_max=0.9, gain_success=0.3))
        db.update({1}, set())
        assert_allclose(db.weights, [0.62 - 0.12 * 0.52 / 0.92, 0.5 - 0.12 * 0.4 / 0.92], rtol=0, atol=1e-12)
        assert_allclose(db.weights, [0.5522, 0.4478], atol=1e-4)

    def test_saturated_weight_is_fixed_point(self):
        db = filled_db(2, RefDbParams(weight_min=0.1, weight_max=0.9))
        db.set_weights([0.9, 0.1])
        db.update({1}, {2})
        assert_allclose(db.weights, [0.9, 0.1])

    def test_empty_update_changes_nothing(self):
        db = filled_db(8)
        db.set_weights(FIG4_WEIGHTS)
        db.update(set(), set())
        assert_allclose(db.weights, FIG4_WEIGHTS)

    def test_matched_reference_overtakes_its_peers(self):
        db = filled_db(6)
        db.update({3}, {1})
        w = db.weights
        self.assertTrue((w[2] > np.delete(w, 2)).all())
        self.assertLess(w[0], w[1])

    def test_rejects_overlapping_sets(self):
        with self.assertRaises(ValueError):
            filled_db(3).update({1}, {1, 2})

    def test_random_operations_keep_invariants(self):
        rng = np.random.default_rng(5)
        db = filled_db(2)
        for _ in range(10_000):
            op = rng.random()
            if op < 0.01 and len(db) < 60:
                db.insert(f"object_{rng.integers(0, 5)}", [])
            elif op < 0.02:
                db.reset_uniform()
            else:
                subset = db.sample_subset(5, rng)
                hits = rng.random(len(subset)) < 0.5
                db.update({i for i, h in zip(subset, hits) if h}, {i for i, h in zip(subset, hits) if not h})
            db.check_invariants()


class StorageTests(SimpleTestCase):

    def test_save_and_load_keeps_references(self):
        rng = np.random.default_rng(6)
        db = ReferenceDatabase()
        for object_id in ('object_0', 'object_1', 'object_0'):
            db.insert(object_id, keypoints(rng))
        db.update({1}, {3})
        with tempfile.TemporaryDirectory() as tmp:
            save_database(db, tmp)
            loaded = load_database(tmp)
        assert_allclose(loaded.weights, db.weights)
        self.assertEqual([ref.object_id for ref in loaded], ['object_0', 'object_1', 'object_0'])
        original, restored = db.get(2).keypoints, loaded.get(2).keypoints
        self.assertEqual([kp.px for kp in restored], [kp.px for kp in original])
        assert_allclose(restored[0].descriptor, original[0].descriptor, rtol=1e-6)
        self.assertEqual(restored[0].length, 16)

    def test_keypoint_file_layout(self):
        rng = np.random.default_rng(7)
        db = ReferenceDatabase()
        db.insert('object_0', keypoints(rng, count=3, length=8))
        with tempfile.TemporaryDirectory() as tmp:
            save_database(db, tmp)
            raw = keypoint_path(tmp, 1).read_bytes()
        self.assertEqual(len(raw), 4 + 3 * (3 + 8) * 4)
        self.assertEqual(np.frombuffer(raw[:4], dtype='<u4')[0], 3)

    def test_missing_index(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(DatabaseFormatError):
                load_database(tmp)

    def test_truncated_keypoint_file(self):
        db = ReferenceDatabase()
        db.insert('object_0', keypoints(np.random.default_rng(8)))
        with tempfile.TemporaryDirectory() as tmp:
            save_database(db, tmp)
            path = keypoint_path(tmp, 1)
            path.write_bytes(path.read_bytes()[:-3])
            with self.assertRaises(DatabaseFormatError):
                load_database(tmp)


class RefDbParamsSerializerTests(SimpleTestCase):

    def test_defaults(self):
        params = build_params(RefDbParamsSerializer)
        self.assertEqual(params, RefDbParams())
        self.assertEqual(params.bounds_for(4), (0.0625, 0.25))

    def test_rejects_gain_of_one(self):
        with self.assertRaises(ValidationError):
            build_params(RefDbParamsSerializer, {'gain_success': '1.0'})

    def test_explicit_bounds(self):
        params = build_params(RefDbParamsSerializer, {'weight_min': '0.01', 'weight_max': '0.9'})
        assert_array_equal(params.bounds_for(10), (0.01, 0.9))
