"""Label schema, latent dataset model and the geometric primitives shared by the metrics."""
import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence, Union

import numpy as np
import pydantic
from pydantic import ConfigDict, field_validator
from scipy.spatial.distance import pdist, squareform

logger = logging.getLogger(__name__)

DEFAULT_DESCRIPTORS = (
    "airy", "boomy", "bright", "clean", "cold", "crunchy", "deep", "dirty", "distorted", "fat",
    "harsh", "metallic", "muddy", "punchy", "rich", "sharp", "smooth", "thin", "warm",
)
DEFAULT_MAGNITUDES = (0.25, 0.5, 0.75, 1.0)
NOTE_NAMES = ("C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B")
GROUP_AXES = ("descriptor", "magnitude", "pitch")

Rows = Union[np.ndarray, Sequence[Sequence[float]]]


def chromatic_range(first: str, last: str) -> tuple[str, ...]:
    """
    Return the chromatic pitch names from first to last inclusive, e.g. E4..D6.

    :param first: The lowest pitch, note name plus octave.
    :param last: The highest pitch.
    :return: The pitch names, sharps used for accidentals.
    """
    def midi(name: str) -> int:
        return NOTE_NAMES.index(name[:-1]) + 12 * (int(name[-1]) + 1)

    return tuple(f"{NOTE_NAMES[m % 12]}{m // 12 - 1}" for m in range(midi(first), midi(last) + 1))


DEFAULT_PITCHES = chromatic_range("E4", "D6")


class DatasetValidationError(ValueError):
    """A dataset, a label or an input file does not conform to the schema or format."""


class LabelSchema(pydantic.BaseModel):
    """
    The valid descriptors, magnitude levels and pitches of a dataset.

    Magnitudes are fractions in (0, 1]; on disk they are written as integer percents.
    """

    model_config = ConfigDict(frozen=True)

    descriptors: tuple[str, ...] = DEFAULT_DESCRIPTORS
    magnitudes: tuple[float, ...] = DEFAULT_MAGNITUDES
    pitches: tuple[str, ...] = DEFAULT_PITCHES

    @field_validator("descriptors", "pitches")
    @classmethod
    def _check_names(cls, value: tuple[str, ...], info) -> tuple[str, ...]:
        if not value:
            raise ValueError(f"{info.field_name} must not be empty")
        if len(set(value)) != len(value):
            raise ValueError(f"{info.field_name} contain duplicates")
        if any(not name or name != name.strip() or "," in name for name in value):
            raise ValueError(f"{info.field_name} must be non-empty names without commas or padding")
        return value

    @field_validator("magnitudes")
    @classmethod
    def _check_magnitudes(cls, value: tuple[float, ...]) -> tuple[float, ...]:
        if not value:
            raise ValueError("magnitudes must not be empty")
        if any(not 0.0 < m <= 1.0 for m in value):
            raise ValueError("magnitudes must lie in (0, 1]")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("magnitudes must be strictly increasing")
        percents = [round(m * 100) for m in value]
        if len(set(percents)) != len(percents):
            raise ValueError("magnitudes must differ by at least one percent")
        return value

    @property
    def magnitude_percents(self) -> tuple[str, ...]:
        """The integer percent spelling of each magnitude, as used in CSV files."""
        return tuple(str(round(m * 100)) for m in self.magnitudes)

    def axis(self, name: str) -> tuple[str, ...]:
        """Return the label names of one axis; magnitudes are given as percent strings."""
        if name == "descriptor":
            return self.descriptors
        if name == "magnitude":
            return self.magnitude_percents
        if name == "pitch":
            return self.pitches
        raise ValueError(f"unknown label axis '{name}', expected one of {', '.join(GROUP_AXES)}")

    def lookup(self, name: str) -> dict[str, int]:
        """Map label spelling to schema index for one axis."""
        return {label: index for index, label in enumerate(self.axis(name))}

    def label_names(self, descriptor_id: int, magnitude_id: int, pitch_id: int) -> tuple[str, str, str]:
        return (self.descriptors[descriptor_id],
                self.magnitude_percents[magnitude_id],
                self.pitches[pitch_id])


def _freeze(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class LatentDataset:
    """
    An N x D float64 embedding matrix with one (descriptor, magnitude, pitch) index triple per row.

    The arrays are copied and made read-only on construction, so a dataset never changes after load.

    :param embeddings: N x D latent coordinates.
    :param labels: N x 3 schema indices in the column order descriptor, magnitude, pitch.
    :param label_schema: The schema the indices refer to.
    :param model_name: Tag of the model that produced the embeddings.
    """

    embeddings: np.ndarray
    labels: np.ndarray
    label_schema: LabelSchema = field(default_factory=LabelSchema)
    model_name: str = "model"

    def __post_init__(self) -> None:
        try:
            embeddings = np.array(self.embeddings, dtype=np.float64)
            labels = np.array(self.labels, dtype=np.int64)
        except (TypeError, ValueError) as e:
            raise DatasetValidationError(f"embeddings and labels must be rectangular numeric arrays: {e}") from e
        if embeddings.ndim != 2 or embeddings.shape[0] < 1 or embeddings.shape[1] < 1:
            raise DatasetValidationError(
                f"embeddings must be an N x D matrix with N >= 1 and D >= 1, got shape {embeddings.shape}")
        not_finite = ~np.isfinite(embeddings)
        if not_finite.any():
            row, col = np.argwhere(not_finite)[0]
            raise DatasetValidationError(f"non-finite embedding value at row {row + 1}, column z{col}")
        if labels.shape != (embeddings.shape[0], 3):
            raise DatasetValidationError(
                f"expected {embeddings.shape[0]} label triples to match the embedding rows, got shape {labels.shape}")
        for column, axis in enumerate(GROUP_AXES):
            size = len(self.label_schema.axis(axis))
            out_of_range = (labels[:, column] < 0) | (labels[:, column] >= size)
            if out_of_range.any():
                row = int(np.flatnonzero(out_of_range)[0])
                raise DatasetValidationError(
                    f"{axis} index {labels[row, column]} out of range [0, {size}) at row {row + 1}")
        object.__setattr__(self, "embeddings", _freeze(embeddings))
        object.__setattr__(self, "labels", _freeze(labels))

    @property
    def n(self) -> int:
        return self.embeddings.shape[0]

    @property
    def dims(self) -> int:
        return self.embeddings.shape[1]

    @property
    def descriptor_ids(self) -> np.ndarray:
        return self.labels[:, 0]

    @property
    def magnitude_ids(self) -> np.ndarray:
        return self.labels[:, 1]

    @property
    def pitch_ids(self) -> np.ndarray:
        return self.labels[:, 2]

    def with_embeddings(self, embeddings: np.ndarray) -> "LatentDataset":
        """Return a copy with the same labels and new coordinates."""
        return replace(self, embeddings=embeddings)

    def with_labels(self, labels: np.ndarray) -> "LatentDataset":
        """Return a copy with the same coordinates and new labels."""
        return replace(self, labels=labels)

    def counts(self, axis: str) -> dict[str, int]:
        """Sample count per schema label of one axis, in schema order, zeros included."""
        names = self.label_schema.axis(axis)
        column = GROUP_AXES.index(axis)
        tally = np.bincount(self.labels[:, column], minlength=len(names))
        return {name: int(tally[i]) for i, name in enumerate(names)}


@dataclass(frozen=True, eq=False)
class GroupIndex:
    """
    Rows sharing one value of each grouping axis.

    :param key: (descriptor_id, magnitude_id, pitch_id) with None for the axes not grouped on.
    :param member_rows: Sorted, unique row indices into the dataset.
    """

    key: tuple[Optional[int], Optional[int], Optional[int]]
    member_rows: np.ndarray

    @property
    def size(self) -> int:
        return len(self.member_rows)

    def name(self, schema: LabelSchema) -> str:
        """Human readable key such as ``bright/75/E4``, skipping the axes not grouped on."""
        parts = [schema.axis(axis)[value] for axis, value in zip(GROUP_AXES, self.key) if value is not None]
        return "/".join(parts)


def group_by(ds: LatentDataset, keys: Union[str, Iterable[str]]) -> list[GroupIndex]:
    """
    Partition the rows of the dataset by one or more label axes.

    Empty groups are omitted; groups come in schema index order of their key.

    :param ds: The dataset.
    :param keys: Any non-empty subset of ``descriptor``, ``magnitude``, ``pitch``.
    :return: The groups, exhaustive and disjoint.
    """
    keys = {keys} if isinstance(keys, str) else set(keys)
    if not keys:
        raise ValueError("group_by needs at least one key")
    unknown = keys.difference(GROUP_AXES)
    if unknown:
        raise ValueError(f"unknown grouping key(s) {sorted(unknown)}, expected a subset of {list(GROUP_AXES)}")
    columns = [i for i, axis in enumerate(GROUP_AXES) if axis in keys]
    unique, inverse = np.unique(ds.labels[:, columns], axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    order = np.argsort(inverse, kind="stable")
    bounds = np.cumsum(np.bincount(inverse, minlength=len(unique)))[:-1]
    groups = []
    for values, rows in zip(unique, np.split(order, bounds)):
        key: list[Optional[int]] = [None, None, None]
        for column, value in zip(columns, values):
            key[column] = int(value)
        groups.append(GroupIndex(key=tuple(key), member_rows=_freeze(rows)))
    return groups


def as_matrix(rows: Rows, min_rows: int = 1) -> np.ndarray:
    """
    Convert a list of D-vectors (or a matrix) to a float64 matrix.

    A flat sequence of numbers is read as N one-dimensional points.

    :raises: ValueError if rows have different lengths or there are fewer than min_rows.
    """
    if not isinstance(rows, np.ndarray):
        rows = [np.atleast_1d(np.asarray(row, dtype=np.float64)) for row in rows]
        if len({row.shape for row in rows}) > 1:
            raise ValueError("dimension mismatch: all rows must have the same length")
        rows = np.array(rows, dtype=np.float64) if rows else np.empty((0, 0))
    matrix = np.asarray(rows, dtype=np.float64)
    if matrix.ndim == 1:
        matrix = matrix.reshape(-1, 1)
    if matrix.ndim != 2:
        raise ValueError(f"expected a list of vectors, got an array of shape {matrix.shape}")
    if matrix.shape[0] < min_rows:
        raise ValueError(f"at least {min_rows} row(s) required, got {matrix.shape[0]}")
    return matrix


def pairwise_distances(rows: Rows) -> np.ndarray:
    """
    All C(n, 2) Euclidean distances between the rows, pair (i, j) with i < j in lexicographic order.

    :param rows: At least two vectors of equal dimension.
    :return: A condensed distance vector of length n(n-1)/2.
    """
    return pdist(as_matrix(rows, min_rows=2), metric="euclidean")


def distance_matrix(rows: Rows) -> np.ndarray:
    """The symmetric n x n Euclidean distance matrix, zero diagonal."""
    matrix = as_matrix(rows, min_rows=1)
    if matrix.shape[0] == 1:
        return np.zeros((1, 1))
    return squareform(pdist(matrix, metric="euclidean"))


def centroid(rows: Rows) -> np.ndarray:
    """Arithmetic mean of the rows, per dimension."""
    try:
        matrix = as_matrix(rows, min_rows=1)
    except ValueError as e:
        raise ValueError(f"centroid of an empty set is undefined: {e}") from e
    return matrix.mean(axis=0)
