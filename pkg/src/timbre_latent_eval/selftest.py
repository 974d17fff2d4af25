"""
Embedded oracle suite behind ``tle selftest``.

Each check compares the package against a hand-computed value or against a brute-force loop written
straight from the formula. Library functions are looked up through their modules at call time.
"""
import logging
import math
import tempfile
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import clustering, core, dataset_io, synth, timbre_metrics

logger = logging.getLogger(__name__)

CHECKS: list[tuple[str, Callable[[], None]]] = []


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: Optional[str] = None


def check(name: str):
    def register(function: Callable[[], None]) -> Callable[[], None]:
        CHECKS.append((name, function))
        return function

    return register


def _close(actual: float, expected: float, tolerance: float, what: str) -> None:
    if not abs(actual - expected) <= tolerance:
        raise AssertionError(f"{what}: got {actual!r}, expected {expected!r} within {tolerance}")


def _tiny_dataset(points, labels, schema: Optional[core.LabelSchema] = None) -> core.LatentDataset:
    schema = schema or core.LabelSchema(descriptors=("a", "b", "c"), magnitudes=(0.5, 1.0), pitches=("p", "q", "r"))
    return core.LatentDataset(embeddings=np.asarray(points, dtype=np.float64).reshape(len(labels), -1),
                              labels=labels, label_schema=schema, model_name="selftest")


def _naive_silhouette(points: list[list[float]], labels: list[int]) -> float:
    def distance(x, y):
        return math.sqrt(sum((u - v) ** 2 for u, v in zip(x, y)))

    scores = []
    for i, x in enumerate(points):
        own = [distance(x, y) for j, y in enumerate(points) if j != i and labels[j] == labels[i]]
        if not own:
            scores.append(0.0)
            continue
        a = sum(own) / len(own)
        b = min(
            sum(distance(x, y) for y, c in zip(points, labels) if c == other) / labels.count(other)
            for other in set(labels) if other != labels[i]
        )
        scores.append(0.0 if max(a, b) == 0 else (b - a) / max(a, b))
    return sum(scores) / len(scores)


@check("pairwise_distances_hand_geometry")
def _pairwise_distances() -> None:
    got = sorted(core.pairwise_distances([[0.0], [1.0], [2.0]]).tolist())
    if got != [1.0, 1.0, 2.0]:
        raise AssertionError(f"got distances {got}, expected 1, 1 and 2")
    _close(float(core.pairwise_distances([[0.0, 0.0], [3.0, 4.0]])[0]), 5.0, 0.0, "3-4-5 triangle")


@check("centroid_symmetry")
def _centroid() -> None:
    got = core.centroid([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]])
    _close(float(np.abs(got).max()), 0.0, 1e-15, "centroid of a symmetric triple")


@check("silhouette_four_points")
def _silhouette_fixture() -> None:
    _close(clustering.silhouette([0.0, 0.1, 10.0, 10.1], [0, 0, 1, 1]), 0.990000, 1e-6, "silhouette")


@check("silhouette_matches_brute_force")
def _silhouette_brute_force() -> None:
    rng = clustering.make_rng(20240601)
    for _ in range(5):
        n = int(rng.integers(6, 30))
        points = rng.normal(size=(n, 3)).tolist()
        labels = rng.integers(0, 3, size=n).tolist()
        if len(set(labels)) < 2:
            continue
        _close(clustering.silhouette(points, labels), _naive_silhouette(points, labels), 1e-9, "silhouette")


@check("purity_two_clusters")
def _purity_fixture() -> None:
    _close(clustering.purity([0, 0, 0, 1, 1, 1], [0, 0, 1, 0, 1, 1]), 4 / 6, 1e-4, "purity")


@check("purity_single_cluster")
def _purity_single() -> None:
    _close(clustering.purity([0, 0, 0, 0], [0, 0, 0, 1]), 0.75, 1e-12, "purity")


@check("kmeans_two_pairs")
def _kmeans_fixture() -> None:
    result = clustering.kmeans([0.0, 0.1, 10.0, 10.1], clustering.KMeansParams(k=2, seed=1))
    got = sorted(result.centroids[:, 0].tolist())
    _close(got[0], 0.05, 1e-12, "low centroid")
    _close(got[1], 10.05, 1e-12, "high centroid")
    if result.assignments[0] != result.assignments[1] or result.assignments[2] != result.assignments[3]:
        raise AssertionError(f"pairs split: {result.assignments.tolist()}")


@check("kmeans_reproducible")
def _kmeans_determinism() -> None:
    points = clustering.make_rng(5).normal(size=(60, 4))
    params = clustering.KMeansParams(k=3, seed=0xC0FFEE)
    first, second = clustering.kmeans(points, params), clustering.kmeans(points, params)
    if not np.array_equal(first.assignments, second.assignments) or first.inertia != second.inertia:
        raise AssertionError("two runs with the same seed differ")


@check("compactness_three_points")
def _compactness() -> None:
    ds = _tiny_dataset([0.0, 1.0, 2.0, 5.0, 5.0], [[0, 0, 0], [0, 1, 0], [0, 0, 1], [1, 0, 0], [1, 1, 0]])
    value = timbre_metrics.compactness(ds)
    _close(value.breakdown["a"], 3 / 7, 1e-4, "compactness of {0, 1, 2}")
    _close(value.breakdown["b"], 1.0, 0.0, "compactness of coincident samples")


@check("cross_pitch_consistency_line")
def _cross_pitch() -> None:
    ds = _tiny_dataset([0.0, 1.0, 2.0], [[0, 0, 0], [0, 0, 1], [0, 0, 2]])
    _close(timbre_metrics.cross_pitch_consistency(ds).aggregate, 0.6796, 1e-3, "cross-pitch consistency")


@check("linearity_right_angle_path")
def _linearity() -> None:
    schema = core.LabelSchema(descriptors=("a",), magnitudes=(0.25, 0.5, 0.75, 1.0), pitches=("p",))
    ds = _tiny_dataset([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [2.0, 1.0]],
                       [[0, m, 0] for m in range(4)], schema)
    _close(timbre_metrics.trajectory_linearity(ds).aggregate, math.sqrt(5) / 3, 1e-4, "linearity")


@check("step_consistency_uneven_steps")
def _step_consistency() -> None:
    schema = core.LabelSchema(descriptors=("a",), magnitudes=(0.25, 0.5, 0.75, 1.0), pitches=("p",))
    ds = _tiny_dataset([0.0, 1.0, 2.0, 4.0], [[0, m, 0] for m in range(4)], schema)
    _close(timbre_metrics.step_consistency(ds).aggregate, 0.7388, 1e-3, "step consistency")


@check("synth_straight_trajectories")
def _synth_ground_truth() -> None:
    schema = core.LabelSchema(descriptors=("a", "b"), magnitudes=(0.25, 0.5, 0.75, 1.0), pitches=("p", "q", "r"))
    ds = synth.generate(synth.SynthConfig(dims=8, label_schema=schema, noise_sigma=0.0, seed=7))
    _close(timbre_metrics.trajectory_linearity(ds).aggregate, 1.0, 1e-9, "linearity")
    _close(timbre_metrics.step_consistency(ds).aggregate, 1.0, 1e-9, "step consistency")
    _close(timbre_metrics.cross_pitch_consistency(ds).aggregate, 1.0, 1e-9, "cross-pitch consistency")


@check("dataset_round_trip")
def _round_trip() -> None:
    ds = _tiny_dataset([[1e300, -0.0], [0.1, 2.0 / 3.0]], [[0, 0, 0], [2, 1, 2]])
    with tempfile.TemporaryDirectory() as root:
        for target in (Path(root) / "combined.csv", Path(root) / "split"):
            dataset_io.save_dataset(ds, target)
            loaded = dataset_io.load_dataset(target, schema=ds.label_schema)
            if loaded.embeddings.tobytes() != ds.embeddings.tobytes() or not np.array_equal(loaded.labels, ds.labels):
                raise AssertionError(f"round trip through {target.name} changed the dataset")


@check("global_silhouette_distance_pairs")
def _global_silhouette_pairs() -> None:
    points = clustering.make_rng(11).normal(size=(12, 2))
    labels = [i % 3 for i in range(12)]
    ds = _tiny_dataset(points, [[c, 0, 0] for c in labels])
    expected = _naive_silhouette(points.tolist(), labels)
    _close(timbre_metrics.global_descriptor_silhouette(ds).aggregate, expected, 1e-9, "global silhouette")
    pairs = list(combinations(range(12), 2))
    direct = [math.dist(points[i], points[j]) for i, j in pairs]
    _close(float(np.max(np.abs(core.pairwise_distances(points) - direct))), 0.0, 1e-12, "pair order")


def run_checks() -> list[CheckResult]:
    """Run every registered check; a check fails on any exception."""
    results = []
    for name, function in CHECKS:
        try:
            function()
            results.append(CheckResult(name=name, passed=True))
        except Exception as e:
            logger.debug("Check %s failed.", name, exc_info=True)
            results.append(CheckResult(name=name, passed=False, detail=f"{type(e).__name__}: {e}"))
    return results


def render_results(results: list[CheckResult]) -> str:
    lines = [f"PASS  {r.name}" if r.passed else f"FAIL  {r.name}: {r.detail}" for r in results]
    lines.append(f"{sum(r.passed for r in results)}/{len(results)} checks passed")
    return "\n".join(lines) + "\n"
