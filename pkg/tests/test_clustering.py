import unittest

import numpy as np
import oracles
import pydantic
from ddt import data, ddt, unpack

from timbre_latent_eval.clustering import KMeansParams, kmeans, make_rng, purity, silhouette, silhouette_samples


@ddt
class TestKMeans(unittest.TestCase):
    """Tests for seeded k-means."""

    def test_two_pairs(self):
        result = kmeans([0.0, 0.1, 10.0, 10.1], KMeansParams(k=2, seed=3))
        self.assertEqual(sorted(np.round(result.centroids[:, 0], 12).tolist()), [0.05, 10.05])
        labels = result.assignments.tolist()
        self.assertEqual(labels[0], labels[1])
        self.assertEqual(labels[2], labels[3])
        self.assertNotEqual(labels[0], labels[2])
        self.assertAlmostEqual(result.inertia, 4 * 0.05 ** 2, places=12)
        self.assertTrue(result.converged)

    def test_single_cluster(self):
        points = make_rng(1).normal(size=(30, 3))
        result = kmeans(points, KMeansParams(k=1))
        self.assertTrue(np.allclose(result.centroids[0], points.mean(axis=0), atol=1e-12))
        self.assertAlmostEqual(result.inertia, float(points.var(axis=0).sum() * 30), places=9)
        self.assertEqual(set(result.assignments.tolist()), {0})

    def test_every_point_its_own_cluster(self):
        points = make_rng(2).normal(size=(6, 2))
        result = kmeans(points, KMeansParams(k=6))
        self.assertEqual(result.inertia, 0.0)
        self.assertEqual(sorted(result.assignments.tolist()), list(range(6)))

    def test_coincident_points(self):
        result = kmeans(np.zeros((5, 2)), KMeansParams(k=3))
        self.assertEqual(result.inertia, 0.0)
        self.assertEqual(np.bincount(result.assignments, minlength=3).min(), 1)

    def test_deterministic(self):
        points = make_rng(4).normal(size=(80, 5))
        params = KMeansParams(k=4, seed=0xC0FFEE)
        first, second = kmeans(points, params), kmeans(points, params)
        self.assertTrue(np.array_equal(first.assignments, second.assignments))
        self.assertEqual(first.centroids.tobytes(), second.centroids.tobytes())
        self.assertEqual(first.restart_inertias, second.restart_inertias)

    def test_best_restart_is_kept(self):
        points = make_rng(5).normal(size=(60, 2))
        result = kmeans(points, KMeansParams(k=5, n_init=6))
        self.assertEqual(len(result.restart_inertias), 6)
        self.assertEqual(result.inertia, min(result.restart_inertias))
        self.assertEqual(result.inertia, result.inertia_history[-1])
        self.assertEqual(len(result.inertia_history), result.iterations_run)

    def test_inertia_never_increases(self):
        points = make_rng(6).normal(size=(120, 3))
        history = kmeans(points, KMeansParams(k=6, n_init=1, tolerance=1e-12)).inertia_history
        for before, after in zip(history, history[1:]):
            self.assertLessEqual(after, before + 1e-9)

    def test_centroids_are_member_means(self):
        points = make_rng(7).normal(size=(50, 2))
        result = kmeans(points, KMeansParams(k=4))
        for j in range(4):
            members = points[result.assignments == j]
            self.assertTrue(np.allclose(result.centroids[j], members.mean(axis=0)))

    def test_iteration_cap(self):
        points = make_rng(8).normal(size=(200, 2))
        result = kmeans(points, KMeansParams(k=8, max_iterations=1, n_init=1))
        self.assertEqual(result.iterations_run, 1)

    @data(
        (np.zeros((2, 2)), 3, "at least k=3 rows"),
        (np.array([[0.0, np.nan], [1.0, 1.0]]), 1, "non-finite"),
    )
    @unpack
    def test_invalid_input(self, points, k, message):
        with self.assertRaisesRegex(ValueError, message):
            kmeans(points, KMeansParams(k=k))

    @data({"k": 0}, {"k": 2, "seed": -1}, {"k": 2, "seed": 2 ** 64}, {"k": 2, "tolerance": 0}, {"k": 2, "n_init": 0})
    def test_invalid_params(self, fields):
        with self.assertRaises(pydantic.ValidationError):
            KMeansParams(**fields)


@ddt
class TestSilhouette(unittest.TestCase):
    """Tests for the silhouette score."""

    def test_four_points(self):
        self.assertAlmostEqual(silhouette([0.0, 0.1, 10.0, 10.1], [0, 0, 1, 1]), 0.990000, delta=1e-6)

    def test_identical_point_sets(self):
        points = [[0.0], [1.0], [5.0], [0.0], [1.0], [5.0]]
        self.assertLessEqual(silhouette(points, [0, 0, 0, 1, 1, 1]), 0.0)

    def test_relabelling(self):
        rng = make_rng(9)
        points = rng.normal(size=(40, 3))
        labels = rng.integers(0, 4, size=40)
        relabelled = np.array([7, -2, 30, 4])[labels]
        self.assertAlmostEqual(silhouette(points, labels), silhouette(points, relabelled), delta=1e-12)

    def test_singleton_class_scores_zero(self):
        scores = silhouette_samples([[0.0], [0.1], [10.0]], [0, 0, 1])
        self.assertEqual(scores[2], 0.0)
        self.assertGreater(scores[0], 0.9)

    def test_coincident_samples_score_zero(self):
        scores = silhouette_samples(np.zeros((4, 2)), [0, 0, 1, 1])
        self.assertEqual(scores.tolist(), [0.0, 0.0, 0.0, 0.0])

    def test_all_singleton_classes(self):
        scores = silhouette_samples([[0.0], [1.0], [3.0]], [4, 5, 6])
        self.assertEqual(scores.tolist(), [0.0, 0.0, 0.0])

    @data(2, 8, 21)
    def test_rigid_motion(self, seed):
        rng = make_rng(seed)
        points = rng.normal(size=(30, 4))
        labels = rng.integers(0, 3, size=30)
        rotation, _ = np.linalg.qr(rng.normal(size=(4, 4)))
        moved = points @ rotation + rng.normal(size=4) * 50.0
        self.assertAlmostEqual(silhouette(moved, labels), silhouette(points, labels), delta=1e-9)

    @data(3, 11, 29, 101, 157)
    def test_matches_brute_force(self, seed):
        rng = make_rng(seed)
        n = int(rng.integers(5, 60))
        points = rng.normal(size=(n, int(rng.integers(1, 6))))
        labels = rng.integers(0, int(rng.integers(2, 6)), size=n)
        if len(set(labels.tolist())) < 2:
            labels[0], labels[1] = 0, 1
        expected = oracles.silhouette(points.tolist(), labels.tolist())
        self.assertAlmostEqual(silhouette(points, labels), expected, delta=1e-9)

    def test_range(self):
        rng = make_rng(12)
        for _ in range(20):
            points = rng.normal(size=(25, 2))
            value = silhouette(points, rng.integers(0, 3, size=25))
            self.assertTrue(-1.0 <= value <= 1.0)

    @data(
        ([[0.0]], [0], "at least 2 samples"),
        ([[0.0], [1.0]], [0, 0], "at least 2 distinct classes"),
        ([[0.0], [1.0]], [0, 1, 1], "3 labels given for 2 rows"),
    )
    @unpack
    def test_invalid(self, points, labels, message):
        with self.assertRaisesRegex(ValueError, message):
            silhouette(points, labels)


@ddt
class TestPurity(unittest.TestCase):
    """Tests for cluster purity."""

    @data(
        ([0, 0, 1, 1, 2], [5, 5, 3, 3, 9], 1.0),
        ([0, 0, 0, 1, 1, 1], [0, 0, 1, 0, 1, 1], 4 / 6),
        ([0, 0, 0, 0], [0, 0, 0, 1], 3 / 4),
    )
    @unpack
    def test_hand_counts(self, predicted, truth, expected):
        self.assertAlmostEqual(purity(predicted, truth), expected, places=12)

    def test_matches_brute_force(self):
        rng = make_rng(13)
        for _ in range(10):
            predicted = rng.integers(0, 5, size=50).tolist()
            truth = rng.integers(0, 4, size=50).tolist()
            self.assertAlmostEqual(purity(predicted, truth), oracles.purity(predicted, truth), places=12)

    def test_permuted_ids(self):
        rng = make_rng(17)
        predicted = rng.integers(0, 4, size=40)
        truth = rng.integers(0, 3, size=40)
        expected = purity(predicted, truth)
        self.assertEqual(purity(np.array([3, 0, 2, 1])[predicted], truth), expected)
        self.assertEqual(purity(predicted, np.array([2, 0, 1])[truth]), expected)

    def test_one_cluster_per_sample(self):
        rng = make_rng(23)
        points = rng.normal(size=(12, 3))
        truth = rng.integers(0, 3, size=12)
        assignment = kmeans(points, KMeansParams(k=12, seed=5))
        self.assertEqual(purity(assignment.assignments, truth), 1.0)

    def test_invalid(self):
        with self.assertRaisesRegex(ValueError, "length mismatch"):
            purity([0, 1], [0])
        with self.assertRaisesRegex(ValueError, "empty"):
            purity([], [])
