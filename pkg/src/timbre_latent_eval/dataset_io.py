"""Reading and writing latent datasets: combined CSV and labels CSV with a raw float64 sidecar."""
import csv
import json
import logging
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pydantic

from .core import GROUP_AXES, DatasetValidationError, LabelSchema, LatentDataset

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

LABEL_COLUMNS = ("id", "descriptor", "magnitude", "pitch")
LABELS_FILE = "labels.csv"
EMBEDDINGS_FILE = "embeddings.f64"
META_FILE = "meta.json"
SCHEMA_FILE = "schema.json"
RAW_DTYPE = np.dtype("<f8")


class DatasetFormat(str, Enum):
    COMBINED_CSV = "combined-csv"
    SPLIT = "labels-csv+raw-f64"


def load_schema(path: PathLike) -> LabelSchema:
    """
    Read a schema file ``{"descriptors": [...], "magnitudes": [...], "pitches": [...]}``.

    Missing keys fall back to the default schema's lists.
    """
    with open(path, encoding="utf-8") as fp:
        text = fp.read()
    try:
        return LabelSchema.model_validate_json(text)
    except pydantic.ValidationError as e:
        raise DatasetValidationError(f"invalid schema file {path}: {e}") from e


def save_schema(schema: LabelSchema, path: PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fp:
        fp.write(schema.model_dump_json(indent=2))
        fp.write("\n")


def _split_paths(path: PathLike) -> tuple[Path, Path, Path]:
    """Return the labels CSV, raw embeddings and meta paths of a split-format dataset."""
    path = Path(path)
    if path.is_dir() or path.suffix.lower() != ".csv":
        labels = path / LABELS_FILE
    else:
        labels = path
    return labels, labels.with_name(EMBEDDINGS_FILE), labels.with_name(META_FILE)


def _read_header(path: Path) -> list[str]:
    with open(path, newline="", encoding="utf-8") as fp:
        header = next(csv.reader(fp), None)
    if header is None:
        raise DatasetValidationError(f"{path} is empty, expected a header row")
    return [column.strip() for column in header]


def detect_format(path: PathLike) -> DatasetFormat:
    """
    Guess the format of an input.

    A directory or a CSV whose header is exactly ``id,descriptor,magnitude,pitch`` is the split
    format; anything else is read as combined CSV.
    """
    path = Path(path)
    if path.is_dir():
        return DatasetFormat.SPLIT
    if tuple(_read_header(path)) == LABEL_COLUMNS:
        return DatasetFormat.SPLIT
    return DatasetFormat.COMBINED_CSV


def _parse_labels(row: list[str], row_number: int, lookups: dict[str, dict[str, int]]) -> tuple[int, int, int]:
    ids = []
    for axis, value in zip(GROUP_AXES, row[1:4]):
        index = lookups[axis].get(value.strip())
        if index is None:
            raise DatasetValidationError(f"unknown {axis} '{value}' at row {row_number}")
        ids.append(index)
    return ids[0], ids[1], ids[2]


def _iter_rows(path: Path, width: int):
    """Yield (1-based data row number, cells) after the header, checking the column count."""
    with open(path, newline="", encoding="utf-8") as fp:
        reader = csv.reader(fp)
        next(reader, None)
        for row_number, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != width:
                raise DatasetValidationError(
                    f"malformed row {row_number} in {path}: expected {width} columns, got {len(row)}")
            yield row_number, row


def _load_combined(path: Path, schema: LabelSchema, model_name: str) -> LatentDataset:
    header = _read_header(path)
    expected_z = [f"z{j}" for j in range(len(header) - len(LABEL_COLUMNS))]
    if tuple(header[:4]) != LABEL_COLUMNS or header[4:] != expected_z or not expected_z:
        raise DatasetValidationError(
            f"malformed header in {path}: expected 'id,descriptor,magnitude,pitch,z0,...,z{{D-1}}'")
    lookups = {axis: schema.lookup(axis) for axis in GROUP_AXES}
    labels = []
    embeddings = []
    for row_number, row in _iter_rows(path, len(header)):
        labels.append(_parse_labels(row, row_number, lookups))
        values = []
        for column, cell in zip(header[4:], row[4:]):
            if "_" in cell:
                raise DatasetValidationError(
                    f"digit separator in embedding value '{cell}' at row {row_number}, column {column}")
            try:
                values.append(float(cell))
            except ValueError:
                raise DatasetValidationError(
                    f"non-numeric embedding value '{cell}' at row {row_number}, column {column}") from None
        embeddings.append(values)
    if not labels:
        raise DatasetValidationError(f"{path} contains no data rows")
    return LatentDataset(embeddings=np.array(embeddings, dtype=np.float64), labels=np.array(labels),
                         label_schema=schema, model_name=model_name)


def _check_dimensions(dims: Optional[int], meta_dims: Optional[int]) -> int:
    """
    Resolve the embedding dimensionality of a raw sidecar.

    :return: the dimensionality to use.
    :raises: DatasetValidationError if neither source gives it, or both give different values.
    """
    if dims is None:
        if meta_dims is None:
            raise DatasetValidationError(
                "No embedding dimensions were provided: pass dims (--dims) "
                f"or add a {META_FILE} sidecar with {{\"n\": N, \"d\": D}}.")
        dims = meta_dims
    if meta_dims is not None and dims != meta_dims:
        raise DatasetValidationError(f"dims={dims} is different from d={meta_dims} given in {META_FILE}.")
    if dims < 1:
        raise DatasetValidationError(f"dims must be >= 1, got {dims}")
    return dims


def _read_meta(meta_path: Path) -> dict:
    if not meta_path.exists():
        return {}
    with open(meta_path, encoding="utf-8") as fp:
        try:
            meta = json.load(fp)
        except json.JSONDecodeError as e:
            raise DatasetValidationError(f"malformed {meta_path}: {e}") from e
    if not isinstance(meta, dict):
        raise DatasetValidationError(f"malformed {meta_path}: expected a JSON object")
    return meta


def _load_split(path: Path, schema: LabelSchema, dims: Optional[int], model_name: Optional[str]) -> LatentDataset:
    labels_path, embeddings_path, meta_path = _split_paths(path)
    for required in (labels_path, embeddings_path):
        if not required.exists():
            raise FileNotFoundError(f"input not found: {required}")
    if tuple(_read_header(labels_path)) != LABEL_COLUMNS:
        raise DatasetValidationError(f"malformed header in {labels_path}: expected 'id,descriptor,magnitude,pitch'")
    lookups = {axis: schema.lookup(axis) for axis in GROUP_AXES}
    labels = [_parse_labels(row, row_number, lookups) for row_number, row in _iter_rows(labels_path, 4)]
    if not labels:
        raise DatasetValidationError(f"{labels_path} contains no data rows")

    meta = _read_meta(meta_path)
    dims = _check_dimensions(dims, meta.get("d"))
    raw = np.fromfile(embeddings_path, dtype=RAW_DTYPE)
    if raw.size % dims:
        raise DatasetValidationError(
            f"{embeddings_path} holds {raw.size} values, which is not a multiple of D={dims}")
    n_rows = raw.size // dims
    if n_rows != len(labels):
        raise DatasetValidationError(
            f"embedding-row count {n_rows} does not match label-row count {len(labels)} in {labels_path}")
    if "n" in meta and meta["n"] != n_rows:
        raise DatasetValidationError(f"{meta_path} declares n={meta['n']} but {n_rows} rows were read")
    if model_name is None:
        model_name = meta.get("model_name") or (
            labels_path.parent.name if labels_path.name == LABELS_FILE else labels_path.stem)
    return LatentDataset(embeddings=raw.reshape(n_rows, dims).astype(np.float64), labels=np.array(labels),
                         label_schema=schema, model_name=model_name)


def load_dataset(path: PathLike,
                 fmt: Union[DatasetFormat, str, None] = None,
                 dims: Optional[int] = None,
                 schema: Optional[LabelSchema] = None,
                 model_name: Optional[str] = None) -> LatentDataset:
    """
    Load and validate a dataset; row order equals file order.

    :param path: Combined CSV, split-format labels CSV, or a directory holding ``labels.csv``.
    :param fmt: The format, detected from the file when omitted.
    :param dims: Embedding dimensionality for the split format when there is no ``meta.json``.
    :param schema: The label schema, the default one when omitted.
    :param model_name: Tag of the dataset, derived from the path when omitted.
    :return: The dataset.
    :raises: FileNotFoundError for a missing input, DatasetValidationError for malformed content.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"input not found: {path}")
    fmt = DatasetFormat(fmt) if fmt is not None else detect_format(path)
    schema = schema if schema is not None else LabelSchema()
    if fmt is DatasetFormat.COMBINED_CSV:
        ds = _load_combined(path, schema, model_name or path.stem)
    else:
        ds = _load_split(path, schema, dims, model_name)
    logger.info("Loaded %s as %s: N=%d, D=%d.", path, fmt.value, ds.n, ds.dims)
    return ds


def _label_rows(ds: LatentDataset):
    schema = ds.label_schema
    for index, (d, m, p) in enumerate(ds.labels.tolist()):
        yield [str(index), *schema.label_names(d, m, p)]


def save_dataset(ds: LatentDataset, path: PathLike, fmt: Union[DatasetFormat, str, None] = None) -> None:
    """
    Write a dataset so that load_dataset reproduces it exactly.

    CSV cells use the shortest repr that round-trips a float64; the raw sidecar is little-endian
    float64, row-major, no header.

    :param ds: The dataset.
    :param path: A ``.csv`` file for the combined format; for the split format a labels CSV path
                 or a directory that receives ``labels.csv``, ``embeddings.f64`` and ``meta.json``.
    :param fmt: The format, combined CSV for ``*.csv`` paths and split otherwise when omitted.
    """
    path = Path(path)
    if fmt is None:
        fmt = DatasetFormat.COMBINED_CSV if path.suffix.lower() == ".csv" else DatasetFormat.SPLIT
    fmt = DatasetFormat(fmt)
    if fmt is DatasetFormat.COMBINED_CSV:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fp:
            writer = csv.writer(fp, lineterminator="\n")
            writer.writerow([*LABEL_COLUMNS, *(f"z{j}" for j in range(ds.dims))])
            for labels, values in zip(_label_rows(ds), ds.embeddings.tolist()):
                writer.writerow([*labels, *(repr(v) for v in values)])
    else:
        labels_path, embeddings_path, meta_path = _split_paths(path)
        labels_path.parent.mkdir(parents=True, exist_ok=True)
        with open(labels_path, "w", newline="", encoding="utf-8") as fp:
            writer = csv.writer(fp, lineterminator="\n")
            writer.writerow(LABEL_COLUMNS)
            writer.writerows(_label_rows(ds))
        np.ascontiguousarray(ds.embeddings, dtype=RAW_DTYPE).tofile(embeddings_path)
        with open(meta_path, "w", encoding="utf-8") as fp:
            json.dump({"n": ds.n, "d": ds.dims, "model_name": ds.model_name}, fp)
            fp.write("\n")
    logger.info("Saved %s as %s: N=%d, D=%d.", path, fmt.value, ds.n, ds.dims)
