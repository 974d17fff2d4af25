"""
Latent-space structure metrics for labelled timbre embeddings.

Every metric returns a MetricValue. Metrics built from per-group values (per descriptor, per pitch,
per descriptor/magnitude combination, per trajectory) aggregate them with an unweighted mean and
record the groups they had to leave out. Standard deviations are population standard deviations.
"""
import logging
from enum import Enum
from typing import Iterable, Iterator, Optional, Union

import numpy as np
import pydantic
from opentelemetry import trace
from pydantic import ConfigDict, Field

from .clustering import DEFAULT_SEED, MAX_SEED, PRNG_NAME, KMeansParams, kmeans, purity, silhouette
from .core import LatentDataset, Rows, as_matrix, centroid, group_by, pairwise_distances

logger = logging.getLogger(__name__)
tracer = trace.get_tracer(__name__)

METRIC_NAMES = (
    "global_silhouette",
    "purity",
    "compactness",
    "magnitude_silhouette",
    "within_pitch_silhouette",
    "cross_pitch_consistency",
    "linearity",
    "step_consistency",
)
SILHOUETTE_METRICS = ("global_silhouette", "magnitude_silhouette", "within_pitch_silhouette")
MIN_CROSS_PITCH_PITCHES = 3
PURITY_N_INIT = 10


class TrajectoryMode(str, Enum):
    PER_PITCH = "per-pitch"
    POOLED = "pooled"


class SkippedGroup(pydantic.BaseModel):
    model_config = ConfigDict(frozen=True)

    key: str
    reason: str


class MetricUndefinedError(ValueError):
    """The dataset does not meet a metric's precondition."""

    def __init__(self, reason: str, skipped: Iterable[SkippedGroup] = ()) -> None:
        super().__init__(reason)
        self.skipped = list(skipped)


class MetricValue(pydantic.BaseModel):
    """
    One metric of one model.

    :param defined: False when the precondition failed; reason then says why.
    :param aggregate: The reported scalar, the mean of breakdown when breakdown is non-empty.
    :param breakdown: Value per group, keyed like ``bright``, ``E4``, ``bright/75`` or ``bright/E4``,
                      in schema order.
    :param skipped: Groups excluded from the aggregate, with the reason.
    """

    model_config = ConfigDict(frozen=True)

    defined: bool = True
    aggregate: Optional[float] = None
    reason: Optional[str] = None
    breakdown: dict[str, float] = Field(default_factory=dict)
    skipped: list[SkippedGroup] = Field(default_factory=list)

    @classmethod
    def single(cls, value: float) -> "MetricValue":
        return cls(aggregate=float(value))

    @classmethod
    def from_breakdown(cls, breakdown: dict[str, float], skipped: list[SkippedGroup]) -> "MetricValue":
        return cls(aggregate=float(np.mean(list(breakdown.values()))), breakdown=breakdown, skipped=skipped)

    @classmethod
    def undefined(cls, reason: str, skipped: Iterable[SkippedGroup] = ()) -> "MetricValue":
        return cls(defined=False, reason=reason, skipped=list(skipped))


class EvaluationConfig(pydantic.BaseModel):
    model_config = ConfigDict(frozen=True)

    seed: int = Field(default=DEFAULT_SEED, ge=0, le=MAX_SEED)
    trajectory_mode: TrajectoryMode = TrajectoryMode.PER_PITCH


class PurityClustering(pydantic.BaseModel):
    """The k-means configuration behind the purity column."""

    model_config = ConfigDict(frozen=True)

    k: int
    n_init: int
    max_iterations: int
    tolerance: float
    seed: int
    prng: str = PRNG_NAME


class ReportConfig(pydantic.BaseModel):
    model_config = ConfigDict(frozen=True)

    seed: int
    trajectory_mode: TrajectoryMode
    std_convention: str = "population"
    purity_clustering: PurityClustering


class DatasetSummary(pydantic.BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int
    d: int
    descriptor_counts: dict[str, int]
    magnitude_counts: dict[str, int]
    pitch_counts: dict[str, int]

    @classmethod
    def of(cls, ds: LatentDataset) -> "DatasetSummary":
        return cls(n=ds.n, d=ds.dims,
                   descriptor_counts=ds.counts("descriptor"),
                   magnitude_counts=ds.counts("magnitude"),
                   pitch_counts=ds.counts("pitch"))


class MetricReport(pydantic.BaseModel):
    """All eight metrics of one model plus the configuration that produced them."""

    model_config = ConfigDict(frozen=True, protected_namespaces=())

    model_name: str
    global_silhouette: MetricValue
    purity: MetricValue
    compactness: MetricValue
    magnitude_silhouette: MetricValue
    within_pitch_silhouette: MetricValue
    cross_pitch_consistency: MetricValue
    linearity: MetricValue
    step_consistency: MetricValue
    config: ReportConfig
    dataset_summary: DatasetSummary

    def metric(self, name: str) -> MetricValue:
        if name not in METRIC_NAMES:
            raise KeyError(f"unknown metric '{name}'")
        return getattr(self, name)


def _aggregate(breakdown: dict[str, float], skipped: list[SkippedGroup], requirement: str) -> MetricValue:
    if not breakdown:
        raise MetricUndefinedError(requirement, skipped)
    for group in skipped:
        logger.debug("Skipped %s: %s", group.key, group.reason)
    return MetricValue.from_breakdown(breakdown, skipped)


def purity_kmeans_params(k: int, seed: int = DEFAULT_SEED) -> KMeansParams:
    return KMeansParams(k=k, seed=seed, n_init=PURITY_N_INIT)


def mean_distance_compactness(rows: Rows) -> float:
    """1 / (1 + mean pairwise Euclidean distance) of at least two rows."""
    return 1.0 / (1.0 + float(np.mean(pairwise_distances(rows))))


def position_consistency(points: Rows) -> float:
    """1 / (1 + population std of the pairwise distances between the points)."""
    return 1.0 / (1.0 + float(np.std(pairwise_distances(points))))


def path_linearity(points: Rows) -> float:
    """
    Endpoint distance over path length of an ordered sequence of points.

    A path of length 0 counts as perfectly linear.
    """
    points = as_matrix(points, min_rows=2)
    path = float(np.linalg.norm(np.diff(points, axis=0), axis=1).sum())
    if path == 0.0:
        return 1.0
    return min(1.0, float(np.linalg.norm(points[-1] - points[0])) / path)


def step_uniformity(points: Rows) -> float:
    """
    1 / (1 + CV) of the consecutive step lengths of an ordered sequence of points.

    All-zero steps count as perfectly uniform.
    """
    points = as_matrix(points, min_rows=2)
    steps = np.linalg.norm(np.diff(points, axis=0), axis=1)
    mean = float(steps.mean())
    if mean == 0.0:
        return 1.0
    return 1.0 / (1.0 + float(steps.std()) / mean)


def global_descriptor_silhouette(ds: LatentDataset) -> MetricValue:
    """Silhouette of the whole space labelled by descriptor."""
    if ds.n < 2 or len(np.unique(ds.descriptor_ids)) < 2:
        raise MetricUndefinedError("global silhouette needs at least 2 descriptor classes")
    return MetricValue.single(silhouette(ds.embeddings, ds.descriptor_ids))


def descriptor_purity(ds: LatentDataset, seed: int = DEFAULT_SEED) -> MetricValue:
    """
    Purity of a k-means clustering against descriptor labels.

    k is the number of descriptor classes present, with 10 restarts from the given seed.
    """
    k = len(np.unique(ds.descriptor_ids))
    if k < 2:
        raise MetricUndefinedError("purity needs at least 2 descriptor classes")
    if ds.n < k:
        raise MetricUndefinedError(f"purity needs at least k={k} samples, got {ds.n}")
    assignment = kmeans(ds.embeddings, purity_kmeans_params(k, seed))
    logger.debug("Purity clustering: k=%d inertia=%.6g converged=%s", k, assignment.inertia, assignment.converged)
    return MetricValue.single(purity(assignment.assignments, ds.descriptor_ids))


def compactness(ds: LatentDataset) -> MetricValue:
    """Per descriptor 1 / (1 + mean pairwise distance), averaged over descriptors."""
    breakdown, skipped = {}, []
    for group in group_by(ds, "descriptor"):
        name = group.name(ds.label_schema)
        if group.size < 2:
            skipped.append(SkippedGroup(key=name, reason="insufficient samples"))
            continue
        breakdown[name] = mean_distance_compactness(ds.embeddings[group.member_rows])
    return _aggregate(breakdown, skipped, "compactness needs a descriptor with at least 2 samples")


def magnitude_silhouette(ds: LatentDataset) -> MetricValue:
    """Per descriptor, all pitches pooled: silhouette of the samples labelled by magnitude."""
    breakdown, skipped = {}, []
    for group in group_by(ds, "descriptor"):
        name = group.name(ds.label_schema)
        magnitudes = ds.magnitude_ids[group.member_rows]
        if len(np.unique(magnitudes)) < 2:
            skipped.append(SkippedGroup(key=name, reason="fewer than 2 magnitude levels"))
            continue
        breakdown[name] = silhouette(ds.embeddings[group.member_rows], magnitudes)
    return _aggregate(breakdown, skipped, "magnitude silhouette needs a descriptor spanning 2 magnitude levels")


def within_pitch_silhouette(ds: LatentDataset) -> MetricValue:
    """Per ground-truth pitch: silhouette of the samples labelled by descriptor."""
    breakdown, skipped = {}, []
    for group in group_by(ds, "pitch"):
        name = group.name(ds.label_schema)
        descriptors = ds.descriptor_ids[group.member_rows]
        if len(np.unique(descriptors)) < 2:
            skipped.append(SkippedGroup(key=name, reason="fewer than 2 descriptor classes"))
            continue
        breakdown[name] = silhouette(ds.embeddings[group.member_rows], descriptors)
    return _aggregate(breakdown, skipped, "within-pitch silhouette needs a pitch with 2 descriptor classes")


def cross_pitch_consistency(ds: LatentDataset) -> MetricValue:
    """
    Per (descriptor, magnitude): 1 / (1 + std of the distances between its per-pitch centroids).

    Combinations found in fewer than 3 pitches are skipped.
    """
    breakdown, skipped = {}, []
    for group in group_by(ds, ("descriptor", "magnitude")):
        name = group.name(ds.label_schema)
        pitches = ds.pitch_ids[group.member_rows]
        present = np.unique(pitches)
        if len(present) < MIN_CROSS_PITCH_PITCHES:
            skipped.append(SkippedGroup(key=name, reason=f"present in fewer than {MIN_CROSS_PITCH_PITCHES} pitches"))
            continue
        points = np.vstack([centroid(ds.embeddings[group.member_rows[pitches == p]]) for p in present])
        breakdown[name] = position_consistency(points)
    return _aggregate(breakdown, skipped,
                      f"cross-pitch consistency needs a descriptor/magnitude in {MIN_CROSS_PITCH_PITCHES} pitches")


def magnitude_trajectories(ds: LatentDataset,
                           mode: Union[TrajectoryMode, str] = TrajectoryMode.PER_PITCH,
                           ) -> Iterator[tuple[str, Optional[np.ndarray], Optional[str]]]:
    """
    Yield (key, magnitude centroids in increasing magnitude order, skip reason) per trajectory.

    A trajectory is a (descriptor, pitch) pair in per-pitch mode and a descriptor in pooled mode.
    The centroids are None, and the reason set, when a magnitude level has no samples.
    """
    mode = TrajectoryMode(mode)
    keys = ("descriptor", "pitch") if mode is TrajectoryMode.PER_PITCH else ("descriptor",)
    levels = len(ds.label_schema.magnitudes)
    for group in group_by(ds, keys):
        name = group.name(ds.label_schema)
        if levels < 2:
            yield name, None, "fewer than 2 magnitude levels in the schema"
            continue
        magnitudes = ds.magnitude_ids[group.member_rows]
        if len(np.unique(magnitudes)) < levels:
            yield name, None, "incomplete magnitude coverage"
            continue
        points = np.vstack([centroid(ds.embeddings[group.member_rows[magnitudes == m]]) for m in range(levels)])
        yield name, points, None


def _trajectory_metric(ds: LatentDataset, mode, score, label: str) -> MetricValue:
    breakdown, skipped = {}, []
    for name, points, reason in magnitude_trajectories(ds, mode):
        if points is None:
            skipped.append(SkippedGroup(key=name, reason=reason))
        else:
            breakdown[name] = score(points)
    return _aggregate(breakdown, skipped, f"{label} needs a trajectory covering every magnitude level")


def trajectory_linearity(ds: LatentDataset, mode: Union[TrajectoryMode, str] = TrajectoryMode.PER_PITCH) -> MetricValue:
    """Per trajectory: endpoint distance over path length through the magnitude centroids."""
    return _trajectory_metric(ds, mode, path_linearity, "linearity")


def step_consistency(ds: LatentDataset, mode: Union[TrajectoryMode, str] = TrajectoryMode.PER_PITCH) -> MetricValue:
    """Per trajectory: 1 / (1 + CV) of the distances between consecutive magnitude centroids."""
    return _trajectory_metric(ds, mode, step_uniformity, "step consistency")


def evaluate_all(ds: LatentDataset, config: Optional[EvaluationConfig] = None) -> MetricReport:
    """
    Compute every metric of one dataset.

    A metric whose precondition fails is recorded as undefined with the reason; the others still run.

    :param ds: The dataset.
    :param config: Seed for the purity clustering and trajectory mode.
    :return: The report.
    """
    config = config or EvaluationConfig()
    k = len(np.unique(ds.descriptor_ids))
    params = purity_kmeans_params(max(k, 1), config.seed)
    computations = {
        "global_silhouette": lambda: global_descriptor_silhouette(ds),
        "purity": lambda: descriptor_purity(ds, config.seed),
        "compactness": lambda: compactness(ds),
        "magnitude_silhouette": lambda: magnitude_silhouette(ds),
        "within_pitch_silhouette": lambda: within_pitch_silhouette(ds),
        "cross_pitch_consistency": lambda: cross_pitch_consistency(ds),
        "linearity": lambda: trajectory_linearity(ds, config.trajectory_mode),
        "step_consistency": lambda: step_consistency(ds, config.trajectory_mode),
    }
    values = {}
    with tracer.start_as_current_span("evaluate_all") as span:
        span.set_attribute("tle.model_name", ds.model_name)
        span.set_attribute("tle.n", ds.n)
        span.set_attribute("tle.d", ds.dims)
        for name, compute in computations.items():
            with tracer.start_as_current_span(name) as metric_span:
                try:
                    values[name] = compute()
                    metric_span.set_attribute("tle.aggregate", values[name].aggregate)
                    logger.info("%s: %s = %.4f", ds.model_name, name, values[name].aggregate)
                except MetricUndefinedError as e:
                    values[name] = MetricValue.undefined(str(e), e.skipped)
                    metric_span.set_attribute("tle.undefined", str(e))
                    logger.info("%s: %s undefined: %s", ds.model_name, name, e)
    return MetricReport(
        model_name=ds.model_name,
        config=ReportConfig(
            seed=config.seed,
            trajectory_mode=config.trajectory_mode,
            purity_clustering=PurityClustering(
                k=k,
                n_init=params.n_init,
                max_iterations=params.max_iterations,
                tolerance=params.tolerance,
                seed=params.seed,
            ),
        ),
        dataset_summary=DatasetSummary.of(ds),
        **values,
    )
