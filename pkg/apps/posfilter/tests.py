import itertools

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose
from rest_framework.exceptions import ValidationError

from config.params import build_params

from .filter import (
    GREEDY, QUALITY_ABOVE, FilterEntry, FilterParams, InsufficientData,
    NonMonotoneTimestamp, PositionFilter, leave_one_out, quality, weighted_position,
)
from .serializers import FilterParamsSerializer

UP = (0.0, 0.0, 1.0)
NOW = 100.0


def entry(h, q=1.0, age=1.0, a=UP):
    return FilterEntry(h=h, q=q, t=NOW - age, a=a)


def filled(entries, **params):
    f = PositionFilter(FilterParams(**params))
    for e in sorted(entries, key=lambda e: e.t):
        f.push(e)
    return f


class PushTests(SimpleTestCase):

    def test_push_and_capacity(self):
        f = PositionFilter(FilterParams(window=5, outlier_count=1))
        f.push(entry((0, 0, 0), age=10))
        self.assertEqual(len(f), 1)
        for i in range(6):
            f.push(entry((i, 0, 0), age=9 - i))
        self.assertEqual(len(f), 5)
        self.assertEqual(f.entries[0].t, NOW - 8)

    def test_rejects_older_timestamp(self):
        f = PositionFilter()
        f.push(entry((0, 0, 0), age=1))
        with self.assertRaises(NonMonotoneTimestamp):
            f.push(entry((0, 0, 0), age=2))

    def test_entry_validation(self):
        with self.assertRaises(ValueError):
            entry((0, 0, 0), q=0.0)
        self.assertAlmostEqual(np.linalg.norm(entry((0, 0, 0), a=(0, 3, 4)).a), 1.0)


class WeightTests(SimpleTestCase):

    def test_quality_over_age(self):
        f = filled([entry((0, 0, 0), q=2, age=1), entry((1, 0, 0), q=1, age=2)])
        assert_allclose(f.weights(NOW), [0.5, 2.0])

    def test_equal_entries_have_equal_weights(self):
        f = filled([entry((0, 0, 0), age=1), entry((1, 0, 0), age=1)])
        w = f.weights(NOW)
        self.assertEqual(w[0], w[1])


class EstimateTests(SimpleTestCase):

    def test_weighted_mean(self):
        f = filled([entry((0, 0, 0), q=2, age=1), entry((1, 0, 0), q=1, age=2)], outlier_count=0)
        assert_allclose(f.estimate(NOW).position, [0.2, 0.0, 0.0])

    def test_single_entry(self):
        f = filled([entry((0.3, 0.1, 0.8))], outlier_count=0)
        est = f.estimate(NOW)
        assert_allclose(est.position, [0.3, 0.1, 0.8])
        self.assertEqual(est.quality, 0.0)

    def test_far_entry_is_removed(self):
        entries = [entry((0, 0, 0)) for _ in range(9)] + [entry((5, 0, 0))]
        f = filled(entries, outlier_count=1)
        assert_allclose(f.estimate(NOW).position, [0.0, 0.0, 0.0])

    def test_empty_filter(self):
        with self.assertRaises(InsufficientData):
            PositionFilter().estimate(NOW)

    def test_fewer_entries_than_outlier_count_uses_all(self):
        f = filled([entry((0, 0, 0)), entry((1, 0, 0))], outlier_count=2)
        assert_allclose(f.estimate(NOW).position, [0.5, 0.0, 0.0])

    def test_invariant_under_scaled_quality(self):
        rng = np.random.default_rng(1)
        h = rng.normal(size=(6, 3))
        q = rng.uniform(1, 2, size=6)
        ages = rng.uniform(0.5, 3, size=6)
        base = filled([entry(h[i], q[i], ages[i]) for i in range(6)], outlier_count=1)
        scaled = filled([entry(h[i], 7 * q[i], ages[i]) for i in range(6)], outlier_count=1)
        assert_allclose(base.estimate(NOW).position, scaled.estimate(NOW).position)

    def test_estimate_inside_bounding_box(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            h = rng.normal(size=(5, 3))
            entries = [entry(h[i], rng.uniform(0.5, 2), rng.uniform(0.1, 3)) for i in range(5)]
            position = weighted_position(entries, NOW)
            self.assertTrue((position >= h.min(axis=0) - 1e-12).all())
            self.assertTrue((position <= h.max(axis=0) + 1e-12).all())

    def test_no_removal_matches_direct_formula(self):
        rng = np.random.default_rng(3)
        entries = [entry(rng.normal(size=3), rng.uniform(1, 2), rng.uniform(0.2, 2)) for _ in range(6)]
        est = filled(entries, outlier_count=0).estimate(NOW)
        b = np.array([e.q / (NOW - e.t) for e in entries])
        h = np.vstack([e.h for e in entries])
        center = b @ h / b.sum()
        spread = b @ np.linalg.norm(h - center, axis=1) / b.sum()
        assert_allclose(est.position, center)
        self.assertAlmostEqual(est.quality, spread * np.sum(1 / np.array([NOW - e.t for e in entries])) / 10.0)

    def test_leave_one_out_matches_enumeration(self):
        rng = np.random.default_rng(4)
        for size in range(2, 11):
            entries = tuple(entry(rng.normal(size=3), rng.uniform(1, 2), rng.uniform(0.2, 3)) for _ in range(size))
            expected = [
                quality(list(subset), NOW, 10.0)
                for subset in itertools.combinations(entries, size - 1)
            ][::-1]
            assert_allclose(leave_one_out(entries, NOW, 10.0), expected)

    def test_removal_reduces_error_from_gross_outliers(self):
        rng = np.random.default_rng(5)
        truth = np.array([0.45, 0.0, 0.8])
        better = 0
        for _ in range(1000):
            entries = []
            for _ in range(8):
                entries.append(entry(truth + rng.normal(0, 0.01, 3), rng.uniform(1, 2), rng.uniform(1, 3)))
            for _ in range(2):
                offset = rng.normal(size=3)
                offset *= rng.uniform(0.5, 1.0) / np.linalg.norm(offset)
                entries.append(entry(truth + offset, rng.uniform(1, 2), rng.uniform(1, 3)))
            robust = filled(entries, outlier_count=2).estimate(NOW).position
            plain = filled(entries, outlier_count=0).estimate(NOW).position
            better += np.linalg.norm(robust - truth) < np.linalg.norm(plain - truth)
        self.assertGreaterEqual(better, 950)

    def test_greedy_mode_also_drops_outliers(self):
        entries = [entry((0, 0, 0)) for _ in range(8)] + [entry((4, 0, 0)), entry((0, 3, 0))]
        f = filled(entries, outlier_count=2, removal_mode=GREEDY)
        assert_allclose(f.estimate(NOW).position, [0.0, 0.0, 0.0])

    def test_axis_ignores_sign(self):
        f = filled([entry((0, 0, 0), a=(0, 0, 1)), entry((0, 0, 0), a=(0, 0, -1), age=2)], outlier_count=0)
        assert_allclose(f.estimate(NOW).axis, [0.0, 0.0, 1.0])


class ConvergedTests(SimpleTestCase):

    def test_empty_filter(self):
        self.assertFalse(PositionFilter().converged(NOW))

    def test_fresh_consistent_entries(self):
        f = PositionFilter()
        for i in range(10):
            f.push(FilterEntry(h=(0.45, 0.001 * (i % 2), 0.8), q=12, t=NOW - 1.0 + 0.1 * i, a=UP))
        self.assertTrue(f.converged(NOW + 0.1))

    def test_stale_entries(self):
        f = PositionFilter()
        for i in range(10):
            f.push(FilterEntry(h=(0.45, 0.0, 0.8), q=12, t=NOW - 1.0 + 0.1 * i, a=UP))
        self.assertFalse(f.converged(NOW + 30.0))

    def test_not_more_entries_than_outlier_count(self):
        f = filled([entry((0, 0, 0), age=0.01), entry((0, 0, 0), age=0.02)])
        self.assertFalse(f.converged(NOW))

    def test_literal_quality_rule(self):
        f = filled([entry((0, 0, 0)), entry((1, 0, 0))], outlier_count=0,
                   convergence_rule=QUALITY_ABOVE, quality_threshold=0.01)
        self.assertTrue(f.converged(NOW))


class FilterParamsSerializerTests(SimpleTestCase):

    def test_defaults(self):
        self.assertEqual(build_params(FilterParamsSerializer), FilterParams())

    def test_outlier_count_below_window(self):
        with self.assertRaises(ValidationError):
            build_params(FilterParamsSerializer, {'window': '3', 'outlier_count': '3'})

    def test_unknown_rule(self):
        with self.assertRaises(ValidationError):
            build_params(FilterParamsSerializer, {'convergence_rule': 'sometimes'})
