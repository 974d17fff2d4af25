"""Structure metrics for labelled timbre latent spaces."""
from .clustering import ClusterAssignment, KMeansParams, kmeans, purity, silhouette, silhouette_samples
from .core import (
    DatasetValidationError,
    GroupIndex,
    LabelSchema,
    LatentDataset,
    centroid,
    distance_matrix,
    group_by,
    pairwise_distances,
)
from .dataset_io import DatasetFormat, load_dataset, load_schema, save_dataset, save_schema
from .report import ComparisonTable, from_json, render_skips, render_table, report_from_json, report_to_json, to_json
from .synth import SynthConfig, generate
from .timbre_metrics import (
    EvaluationConfig,
    MetricReport,
    MetricUndefinedError,
    MetricValue,
    TrajectoryMode,
    evaluate_all,
)

__version__ = "1.0.0"

__all__ = [
    "ClusterAssignment",
    "ComparisonTable",
    "DatasetFormat",
    "DatasetValidationError",
    "EvaluationConfig",
    "GroupIndex",
    "KMeansParams",
    "LabelSchema",
    "LatentDataset",
    "MetricReport",
    "MetricUndefinedError",
    "MetricValue",
    "SynthConfig",
    "TrajectoryMode",
    "centroid",
    "distance_matrix",
    "evaluate_all",
    "from_json",
    "generate",
    "group_by",
    "kmeans",
    "load_dataset",
    "load_schema",
    "pairwise_distances",
    "purity",
    "render_skips",
    "render_table",
    "report_from_json",
    "report_to_json",
    "save_dataset",
    "save_schema",
    "silhouette",
    "silhouette_samples",
    "to_json",
]
