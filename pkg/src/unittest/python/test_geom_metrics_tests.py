"""Geometric metric test cases"""
import csv
import json
from unittest import TestCase

import numpy as np

from jrm_lab import (UNITTEST_DATA_PATH,
                     InputError,
                     JrmLabException,
                     MetricsReport,
                     brute_force_nearest,
                     chamfer,
                     evaluate_reconstruction,
                     fscore,
                     nearest_neighbors,
                     normal_consistency)


def _unit(rng, count):
    normals = rng.normal(size=(count, 3))
    return normals / np.linalg.norm(normals, axis=1, keepdims=True)


def _fuzzed_cloud(rng, index):
    """every third instance sits on a coarse grid so exact distance ties occur"""
    count = int(rng.integers(1, 257))
    if index % 3 == 0:
        return rng.integers(0, 4, size=(count, 3)) * 0.5
    return rng.normal(size=(count, 3))


class TestGeomMetrics(TestCase):
    """Class for testing chamfer distance, normal consistency and F-score"""

    def test_parametrized_metric_cases(self):
        """Parametrized cases read from metric_cases.csv"""
        with open(UNITTEST_DATA_PATH + "metric_cases.csv", newline="", encoding="utf-8") as csvfile:
            for row in csv.DictReader(csvfile, delimiter=";"):
                test_id, valid = row["ID_TEST"], row["VALID"]
                points_a, points_b = json.loads(row["points_a"]), json.loads(row["points_b"])
                with self.subTest(test_id + valid):
                    if valid == "VALID":
                        if row["metric"] == "chamfer":
                            value = chamfer(points_a, points_b)
                        else:
                            value = fscore(points_a, points_b, float(row["tau"]))
                        self.assertAlmostEqual(value, float(row["RESULT"]), places=9)
                    else:
                        with self.assertRaises(JrmLabException) as cm:
                            if row["metric"] == "chamfer":
                                chamfer(points_a, points_b)
                            else:
                                fscore(points_a, points_b, float(row["tau"]))
                        self.assertEqual(cm.exception.message, row["RESULT"])

    def test_tree_matches_brute_force(self):
        """k-d tree and O(nm) oracle agree, ties included"""
        rng = np.random.default_rng(0)
        grid = np.stack(np.meshgrid(*[np.arange(4.0)] * 3), axis=-1).reshape(-1, 3)
        reference = np.concatenate([grid, grid, rng.random((40, 3))])
        query = np.concatenate([grid + 0.5, rng.random((100, 3)) * 3.0])
        fast = nearest_neighbors(query, reference)
        slow = brute_force_nearest(query, reference)
        self.assertTrue(np.array_equal(fast[1], slow[1]))
        self.assertTrue(np.allclose(fast[0], slow[0], atol=1e-12))
        self.assertTrue(np.all(fast[1][:64] < 64))

    def test_symmetry_and_identity(self):
        """chamfer is symmetric and zero on identical sets"""
        rng = np.random.default_rng(1)
        first, second = rng.random((50, 3)), rng.random((70, 3))
        self.assertAlmostEqual(chamfer(first, second), chamfer(second, first), places=12)
        self.assertEqual(chamfer(first, first), 0.0)
        self.assertEqual(fscore(first, first, 0.01), 100.0)

    def test_normal_consistency(self):
        """orientation-agnostic and bounded"""
        rng = np.random.default_rng(2)
        points = rng.random((30, 3))
        normals = rng.normal(size=(30, 3))
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        self.assertAlmostEqual(normal_consistency(points, normals, points, -normals), 100.0, places=9)
        other = np.tile([0.0, 0.0, 1.0], (30, 1))
        value = normal_consistency(points, normals, points, other)
        self.assertTrue(0.0 <= value <= 100.0)
        with self.assertRaises(InputError) as cm:
            normal_consistency(points, 2.0 * normals, points, normals)
        self.assertEqual(cm.exception.message, "Normals must be unit length")

    def test_metrics_report(self):
        """csv row and json"""
        report = MetricsReport(1.5, 90.0, 80.0, 0.05, 64)
        self.assertEqual(report.to_row(), ["1.500000", "90.000000", "80.000000", "0.05", "64"])
        self.assertEqual(report.to_json()["sample_count"], 64)
        with self.assertRaises(InputError):
            MetricsReport(-1.0, 90.0, 80.0, 0.05, 64)

    def test_evaluate_reconstruction(self):
        """generated tokens with unnormalised and zero normals"""
        rng = np.random.default_rng(3)
        points = rng.random((40, 3))
        normals = np.tile([0.0, 1.0, 0.0], (40, 1))
        tokens = np.concatenate([points, 3.0 * normals], axis=1)
        tokens[0, 3:] = 0.0
        report = evaluate_reconstruction(tokens, points, normals, 0.05)
        self.assertEqual(report.cd, 0.0)
        self.assertAlmostEqual(report.nc, 100.0, places=9)
        self.assertEqual(report.f1, 100.0)
        self.assertEqual(report.sample_count, 40)
        tokens[1, 0] = np.nan
        with self.assertRaises(InputError):
            evaluate_reconstruction(tokens, points, normals)

    def test_tree_matches_brute_force_fuzz(self):
        """200 random instances of up to 256 points, lowest index on ties, all three metrics"""
        rng = np.random.default_rng(40)
        for index in range(200):
            query, reference = _fuzzed_cloud(rng, index), _fuzzed_cloud(rng, index)
            with self.subTest(str(index)):
                fast = nearest_neighbors(query, reference)
                slow = brute_force_nearest(query, reference)
                self.assertTrue(np.array_equal(fast[1], slow[1]))
                self.assertTrue(np.allclose(fast[0], slow[0], rtol=0.0, atol=1e-12))
                self.__assert_metrics_match_oracle(query, reference, _unit(rng, len(query)), _unit(rng, len(reference)))

    def __assert_metrics_match_oracle(self, a, b, normals_a, normals_b):
        forward, to_b = brute_force_nearest(a, b)
        backward, to_a = brute_force_nearest(b, a)
        expected_nc = 50.0 * (np.abs(np.sum(normals_a * normals_b[to_b], axis=1)).mean()
                              + np.abs(np.sum(normals_b * normals_a[to_a], axis=1)).mean())
        precision, recall = np.mean(forward <= 0.05), np.mean(backward <= 0.05)
        expected_f1 = 0.0 if precision + recall == 0 else 200.0 * precision * recall / (precision + recall)
        self.assertAlmostEqual(chamfer(a, b), 50.0 * (forward.mean() + backward.mean()), delta=1e-9)
        self.assertAlmostEqual(normal_consistency(a, normals_a, b, normals_b), expected_nc, delta=1e-9)
        self.assertAlmostEqual(fscore(a, b, 0.05), expected_f1, delta=1e-9)

    def test_normal_consistency_and_fscore_match_brute_force(self):
        """random 128-point clouds against the O(n m) oracle"""
        rng = np.random.default_rng(41)
        for case in range(10):
            a, b = rng.random((128, 3)), rng.random((128, 3))
            normals_a, normals_b = _unit(rng, 128), _unit(rng, 128)
            tau = float(rng.uniform(0.02, 0.2))
            forward, to_b = brute_force_nearest(a, b)
            backward, to_a = brute_force_nearest(b, a)
            expected_nc = 50.0 * (np.abs(np.sum(normals_a * normals_b[to_b], axis=1)).mean()
                                  + np.abs(np.sum(normals_b * normals_a[to_a], axis=1)).mean())
            precision, recall = np.mean(forward <= tau), np.mean(backward <= tau)
            expected_f1 = 0.0 if precision + recall == 0 else 200.0 * precision * recall / (precision + recall)
            with self.subTest(str(case)):
                self.assertAlmostEqual(normal_consistency(a, normals_a, b, normals_b), expected_nc, delta=1e-9)
                self.assertAlmostEqual(fscore(a, b, tau), expected_f1, delta=1e-9)
                self.assertAlmostEqual(chamfer(a, b), 50.0 * (forward.mean() + backward.mean()), delta=1e-9)

    def test_metrics_ignore_point_order(self):
        """shuffling either cloud leaves every metric unchanged"""
        rng = np.random.default_rng(42)
        a, b = rng.random((90, 3)), rng.random((60, 3))
        normals_a, normals_b = _unit(rng, 90), _unit(rng, 60)
        order_a, order_b = rng.permutation(90), rng.permutation(60)
        self.assertAlmostEqual(chamfer(a, b), chamfer(a[order_a], b[order_b]), places=12)
        self.assertAlmostEqual(fscore(a, b, 0.1), fscore(a[order_a], b[order_b], 0.1), places=12)
        self.assertAlmostEqual(normal_consistency(a, normals_a, b, normals_b),
                               normal_consistency(a[order_a], normals_a[order_a], b[order_b], normals_b[order_b]),
                               places=12)

    def test_union_never_increases_chamfer(self):
        """chamfer(A, A u B) <= chamfer(A, B)"""
        rng = np.random.default_rng(43)
        for case in range(50):
            a = rng.normal(size=(int(rng.integers(1, 100)), 3))
            b = rng.normal(loc=rng.normal(size=3), size=(int(rng.integers(1, 100)), 3))
            with self.subTest(str(case)):
                self.assertLessEqual(chamfer(a, np.concatenate([a, b])), chamfer(a, b) + 1e-12)

    def test_far_apart_sets_score_zero(self):
        """no point within tau gives F-score 0"""
        rng = np.random.default_rng(44)
        a = rng.random((20, 3))
        self.assertEqual(fscore(a, a + 5.0, 0.05), 0.0)
        normals = np.tile([1.0, 0.0, 0.0], (20, 1))
        self.assertAlmostEqual(normal_consistency(a, normals, a, np.tile([0.0, 0.0, 1.0], (20, 1))), 0.0,
                               places=12)
