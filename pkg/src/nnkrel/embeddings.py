"""Embedding datasets: file ingestion, validation and L2 normalization.

Two on-disk layouts are supported.

``binary``
    ``b"EMB1"`` magic, little-endian ``u32`` row count, ``u32`` dim count, then
    row-major little-endian float32 payload. Labels live in a separate text
    file, one integer per line.

``csv``
    UTF-8, comma separated. One sample per row: integer label first, then the
    ``d`` feature columns. A non-numeric first line is treated as a header.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

MAGIC = b"EMB1"
_HEADER = struct.Struct("<4sII")
NORM_ATOL = 1e-6


class DatasetError(ValueError):
    """Raised for malformed or inconsistent embedding/label inputs."""


@dataclass(frozen=True, eq=False)
class EmbeddingDataset:
    """Immutable ``N x d`` feature matrix with dense integer labels.

    ``label_values[c]`` is the original label that was remapped to class ``c``.
    """

    vectors: np.ndarray
    labels: np.ndarray
    num_classes: int
    ids: np.ndarray
    label_values: tuple = field(default=())

    def __post_init__(self):
        vectors = np.array(self.vectors, dtype=np.float64, copy=True)
        labels = np.array(self.labels, dtype=np.int64, copy=True)
        ids = np.array(self.ids, copy=True)
        if vectors.ndim != 2 or vectors.shape[0] < 1 or vectors.shape[1] < 1:
            raise DatasetError(f"vectors must be a non-empty 2-D matrix, got shape {vectors.shape}")
        n = vectors.shape[0]
        if labels.shape != (n,):
            raise DatasetError(f"dimension mismatch: {n} embedding rows but {labels.size} labels")
        if ids.shape != (n,):
            raise DatasetError(f"dimension mismatch: {n} embedding rows but {ids.size} ids")
        if self.num_classes < 2:
            raise DatasetError(f"need at least 2 classes, got {self.num_classes}")
        bad = np.flatnonzero(~np.isfinite(vectors).all(axis=1))
        if bad.size:
            raise DatasetError(f"non-finite feature value in row {int(bad[0])}")
        out = np.flatnonzero((labels < 0) | (labels >= self.num_classes))
        if out.size:
            raise DatasetError(
                f"label {int(labels[out[0]])} in row {int(out[0])} outside [0, {self.num_classes})"
            )
        label_values = tuple(self.label_values) or tuple(range(self.num_classes))
        if len(label_values) != self.num_classes:
            raise DatasetError("label_values must have one entry per class")
        for arr in (vectors, labels, ids):
            arr.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "label_values", label_values)

    def __len__(self):
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def is_normalized(self) -> bool:
        norms = np.linalg.norm(self.vectors, axis=1)
        return bool(np.all(np.abs(norms - 1.0) <= NORM_ATOL))

    def with_labels(self, labels) -> "EmbeddingDataset":
        """Same vectors and class space, different labels (e.g. after noise injection)."""
        return EmbeddingDataset(self.vectors, labels, self.num_classes, self.ids, self.label_values)


def dense_labels(raw: Sequence[int], classes: Sequence[int] | None = None):
    """Remap raw label ids to ``[0, C)`` in first-appearance order.

    When ``classes`` is given, it fixes the mapping (``classes[c]`` -> ``c``);
    labels outside it are an error. Returns ``(dense, label_values)``.
    """
    if classes is not None:
        lookup = {int(v): i for i, v in enumerate(classes)}
    else:
        lookup = {}
        for v in raw:
            lookup.setdefault(int(v), len(lookup))
    dense = np.empty(len(raw), dtype=np.int64)
    for row, v in enumerate(raw):
        try:
            dense[row] = lookup[int(v)]
        except KeyError:
            raise DatasetError(f"label {v} in row {row} not in the class mapping") from None
    values = tuple(sorted(lookup, key=lookup.get))
    return dense, values


def _parse_int(token: str, row: int, what: str) -> int:
    try:
        value = float(token)
    except ValueError:
        raise DatasetError(f"{what} in row {row} is not a number: {token!r}") from None
    if not value.is_integer():
        raise DatasetError(f"{what} in row {row} is not an integer: {token!r}")
    return int(value)


def read_labels(path) -> list[int]:
    """One integer label per line; blank lines skipped, non-numeric first line is a header."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    rows = [ln.strip() for ln in lines if ln.strip()]
    if rows and not _is_number(rows[0].split(",")[0]):
        rows = rows[1:]
    if not rows:
        raise DatasetError(f"empty file: {path}")
    return [_parse_int(tok.split(",")[0], i, "label") for i, tok in enumerate(rows)]


def write_labels(path, labels) -> None:
    Path(path).write_text("".join(f"{int(v)}\n" for v in labels), encoding="utf-8")


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def read_binary(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if not data:
        raise DatasetError(f"empty file: {path}")
    if len(data) < _HEADER.size:
        raise DatasetError(f"truncated header in {path}")
    magic, rows, dims = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise DatasetError(f"bad magic {magic!r} in {path}, expected {MAGIC!r}")
    if rows == 0 or dims == 0:
        raise DatasetError(f"empty file: {path} declares {rows}x{dims}")
    expected = _HEADER.size + 4 * rows * dims
    if len(data) != expected:
        got_rows = (len(data) - _HEADER.size) // (4 * dims)
        raise DatasetError(
            f"dimension mismatch in {path}: header says {rows} rows, payload holds row {got_rows}"
            f" ({len(data)} bytes, expected {expected})"
        )
    return np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(rows, dims).copy()


def write_binary(path, vectors) -> None:
    mat = np.ascontiguousarray(vectors, dtype="<f4")
    if mat.ndim != 2:
        raise DatasetError("binary format stores 2-D matrices only")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, mat.shape[0], mat.shape[1]))
        fh.write(mat.tobytes(order="C"))


def read_csv(path):
    """Return ``(raw_labels, features)`` from a label-first CSV."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if rows and not _is_number(rows[0][0].strip()):
        rows = rows[1:]
    if not rows:
        raise DatasetError(f"empty file: {path}")
    width = len(rows[0])
    if width < 2:
        raise DatasetError(f"row 0 of {path} has no feature columns")
    labels, feats = [], np.empty((len(rows), width - 1))
    for i, r in enumerate(rows):
        if len(r) != width:
            raise DatasetError(f"dimension mismatch in row {i}: {len(r) - 1} features, expected {width - 1}")
        labels.append(_parse_int(r[0].strip(), i, "label"))
        try:
            feats[i] = [float(c) for c in r[1:]]
        except ValueError:
            raise DatasetError(f"non-numeric feature value in row {i}") from None
    return labels, feats


def write_csv(path, labels, vectors) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        for lab, row in zip(labels, np.asarray(vectors, dtype=np.float64)):
            writer.writerow([int(lab)] + [repr(float(v)) for v in row])


def load_dataset(embeddings_path, labels_path=None, format="binary", classes=None) -> EmbeddingDataset:
    """Load and validate a dataset; the result is *not* normalized.

    Parameters
    ----------
    embeddings_path : path
        Embedding file in ``format``.
    labels_path : path, optional
        Text label file. Required for ``binary``. For ``csv`` it overrides the
        label column when given.
    format : {"binary", "csv"}
    classes : sequence of int, optional
        Fixed raw-label -> class mapping, e.g. a training set's
        ``label_values`` when loading the matching test set.
    """
    if format == "binary":
        if labels_path is None:
            raise DatasetError("binary format needs a labels file")
        vectors = read_binary(embeddings_path)
        raw = read_labels(labels_path)
    elif format == "csv":
        raw, vectors = read_csv(embeddings_path)
        if labels_path is not None:
            raw = read_labels(labels_path)
    else:
        raise DatasetError(f"unknown format {format!r}; expected 'binary' or 'csv'")

    if len(raw) != vectors.shape[0]:
        row = min(len(raw), vectors.shape[0])
        raise DatasetError(
            f"dimension mismatch: {vectors.shape[0]} embedding rows vs {len(raw)} labels (first unmatched row {row})"
        )
    bad = np.flatnonzero(~np.isfinite(vectors).all(axis=1))
    if bad.size:
        raise DatasetError(f"non-finite feature value in row {int(bad[0])}")
    dense, values = dense_labels(raw, classes)
    num_classes = len(values)
    return EmbeddingDataset(vectors, dense, num_classes, np.arange(len(dense)), values)


def save_dataset(dataset: EmbeddingDataset, embeddings_path, labels_path=None, format="binary") -> None:
    """Write ``dataset`` using its original (pre-remap) label values."""
    raw = [dataset.label_values[c] for c in dataset.labels]
    if format == "binary":
        if labels_path is None:
            raise DatasetError("binary format needs a labels file")
        write_binary(embeddings_path, dataset.vectors)
        write_labels(labels_path, raw)
    elif format == "csv":
        write_csv(embeddings_path, raw, dataset.vectors)
        if labels_path is not None:
            write_labels(labels_path, raw)
    else:
        raise DatasetError(f"unknown format {format!r}; expected 'binary' or 'csv'")


def l2_normalize(dataset: EmbeddingDataset) -> EmbeddingDataset:
    norms = np.linalg.norm(dataset.vectors, axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise DatasetError(f"zero-norm row {int(zero[0])} cannot be normalized")
    vectors = dataset.vectors / norms[:, None]
    return EmbeddingDataset(vectors, dataset.labels, dataset.num_classes, dataset.ids, dataset.label_values)
