"""Immutable feature sets and their on-disk formats.

Binary layout (all little-endian)::

    b"FVS1" | uint32 N | uint32 d | N x (uint16 id_len | id utf-8 | d x float32)

The TSV layout is one record per line: ``id<TAB>v1<TAB>...<TAB>vd``.
"""

from __future__ import annotations

import struct
from collections import namedtuple
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import DataValidationError, UnknownItemError

MAGIC = b"FVS1"
_HEADER = struct.Struct("<4sII")
_IDLEN = struct.Struct("<H")
_DISK_DTYPE = np.dtype("<f4")

FORMATS = ("binary", "tsv")

Issue = namedtuple("Issue", ["item_id", "kind", "component", "severity"])


class FeatureSet:
    """Ordered, read-only mapping from item id to a dense float64 vector.

    Iteration order is insertion order. The backing matrix is shared and
    flagged non-writeable, so a FeatureSet can be read from many threads.
    """

    __slots__ = ("_ids", "_index", "_matrix")

    def __init__(self, ids: Sequence[str], matrix, check_finite: bool = True):
        ids = tuple(ids)
        matrix = np.array(matrix, dtype=np.float64, copy=True, ndmin=2)
        if matrix.ndim != 2 or matrix.shape[0] != len(ids):
            raise DataValidationError(
                f"expected {len(ids)} rows, got matrix of shape {matrix.shape}")
        if matrix.shape[1] < 1:
            raise DataValidationError("dimension must be positive")
        index = {}
        for i, item_id in enumerate(ids):
            if not isinstance(item_id, str) or not item_id:
                raise DataValidationError("item id must be a non-empty string", record=i + 1)
            if item_id in index:
                raise DataValidationError(f"duplicate id {item_id!r}", record=i + 1)
            index[item_id] = i
        if check_finite:
            bad = ~np.isfinite(matrix)
            if bad.any():
                row, col = np.argwhere(bad)[0]
                raise DataValidationError(
                    f"non-finite value in {ids[row]!r} at component {col}", record=row + 1)
        matrix.setflags(write=False)
        self._ids = ids
        self._index = index
        self._matrix = matrix

    @classmethod
    def from_mapping(cls, items: Mapping[str, Iterable[float]]) -> "FeatureSet":
        ids = list(items)
        return cls(ids, np.array([np.asarray(items[i], dtype=np.float64) for i in ids]))

    @property
    def ids(self) -> tuple:
        return self._ids

    @property
    def matrix(self) -> np.ndarray:
        """(N, d) read-only view of all vectors in iteration order."""
        return self._matrix

    @property
    def dim(self) -> int:
        return self._matrix.shape[1]

    def __len__(self):
        return len(self._ids)

    def __iter__(self) -> Iterator[str]:
        return iter(self._ids)

    def __contains__(self, item_id):
        return item_id in self._index

    def __getitem__(self, item_id) -> np.ndarray:
        return self.get(item_id)

    def get(self, item_id: str) -> np.ndarray:
        try:
            return self._matrix[self._index[item_id]]
        except KeyError:
            raise UnknownItemError(item_id) from None

    def index_of(self, item_id: str) -> int:
        try:
            return self._index[item_id]
        except KeyError:
            raise UnknownItemError(item_id) from None

    def items(self):
        return zip(self._ids, self._matrix)

    def subset(self, ids: Iterable[str]) -> "FeatureSet":
        ids = list(ids)
        rows = [self.index_of(i) for i in ids]
        return FeatureSet(ids, self._matrix[rows], check_finite=False)

    def map_rows(self, fn) -> "FeatureSet":
        """Apply a row-wise transform ``fn((N, d)) -> (N, k)`` keeping the ids."""
        return FeatureSet(self._ids, fn(self._matrix))

    def __eq__(self, other):
        if not isinstance(other, FeatureSet):
            return NotImplemented
        return (self._ids == other._ids and self._matrix.shape == other._matrix.shape
                and np.array_equal(self._matrix, other._matrix))

    def __repr__(self):
        return f"FeatureSet({len(self)} items, dim {self.dim})"


def get(features: FeatureSet, item_id: str) -> np.ndarray:
    return features.get(item_id)


def guess_format(path) -> str:
    return "tsv" if str(path).lower().endswith((".tsv", ".txt")) else "binary"


def load_features(path, format: str | None = None, strict: bool = True) -> FeatureSet:
    """Read a feature file.

    With ``strict=False`` non-finite components are accepted so that
    :func:`validate` can report every one of them instead of stopping at
    the first.
    """
    format = format or guess_format(path)
    if format == "binary":
        ids, matrix = _read_binary(Path(path).read_bytes())
    elif format == "tsv":
        ids, matrix = _read_tsv(Path(path).read_text(encoding="utf-8"))
    else:
        raise ValueError(f"unknown feature format {format!r}")
    return FeatureSet(ids, matrix, check_finite=strict)


def save_features(features: FeatureSet, path, format: str | None = None) -> None:
    if features is None or len(features) == 0:
        raise DataValidationError("empty set")
    format = format or guess_format(path)
    if format == "binary":
        Path(path).write_bytes(_encode_binary(features))
    elif format == "tsv":
        Path(path).write_text(_encode_tsv(features), encoding="utf-8")
    else:
        raise ValueError(f"unknown feature format {format!r}")


def _read_binary(buf: bytes):
    if len(buf) < _HEADER.size:
        raise DataValidationError("truncated header")
    magic, n, d = _HEADER.unpack_from(buf, 0)
    if magic != MAGIC:
        raise DataValidationError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if n == 0:
        raise DataValidationError("empty set")
    if d == 0:
        raise DataValidationError("dimension must be positive")
    row_bytes = d * _DISK_DTYPE.itemsize
    ids = []
    matrix = np.empty((n, d), dtype=np.float64)
    pos = _HEADER.size
    for i in range(n):
        if pos + _IDLEN.size > len(buf):
            raise DataValidationError("truncated record", record=i + 1)
        (id_len,) = _IDLEN.unpack_from(buf, pos)
        pos += _IDLEN.size
        end = pos + id_len + row_bytes
        if end > len(buf):
            raise DataValidationError("truncated record", record=i + 1)
        try:
            ids.append(buf[pos:pos + id_len].decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise DataValidationError(f"id is not valid UTF-8 ({exc.reason})", record=i + 1) from None
        matrix[i] = np.frombuffer(buf, dtype=_DISK_DTYPE, count=d, offset=pos + id_len)
        pos = end
    if pos != len(buf):
        raise DataValidationError(f"{len(buf) - pos} trailing bytes after {n} records")
    return ids, matrix


def _encode_binary(features: FeatureSet) -> bytes:
    n, d = features.matrix.shape
    rows = features.matrix.astype(_DISK_DTYPE)
    parts = [_HEADER.pack(MAGIC, n, d)]
    for item_id, row in zip(features.ids, rows):
        raw = item_id.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise DataValidationError(f"id {item_id[:32]!r}... longer than 65535 bytes")
        parts.append(_IDLEN.pack(len(raw)))
        parts.append(raw)
        parts.append(row.tobytes())
    return b"".join(parts)


def _read_tsv(text: str):
    ids, rows = [], []
    dim = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        record = len(ids) + 1
        fields = line.split("\t")
        if len(fields) < 2:
            raise DataValidationError(f"line {lineno}: expected id and values", record=record)
        try:
            values = [float(x) for x in fields[1:]]
        except ValueError as exc:
            raise DataValidationError(f"line {lineno}: {exc}", record=record) from None
        if dim is None:
            dim = len(values)
        elif len(values) != dim:
            raise DataValidationError(
                f"dimension mismatch: {len(values)} values, expected {dim}", record=record)
        ids.append(fields[0])
        rows.append(values)
    if not ids:
        raise DataValidationError("empty set")
    return ids, np.array(rows, dtype=np.float64)


def _encode_tsv(features: FeatureSet) -> str:
    lines = []
    for item_id, row in features.items():
        if "\t" in item_id or "\n" in item_id or "\r" in item_id:
            raise DataValidationError(f"id {item_id!r} contains a tab or newline")
        lines.append("\t".join([item_id] + [repr(float(x)) for x in row]))
    return "\n".join(lines) + "\n"


def validate(features: FeatureSet) -> list:
    """List contract violations: non-finite components (errors) and zero vectors (warnings).

    An empty list means the set is safe to feed to the pipeline.
    """
    report = []
    for item_id, row in features.items():
        bad = np.flatnonzero(~np.isfinite(row))
        for col in bad:
            report.append(Issue(item_id, "non-finite", int(col), "error"))
        if not len(bad) and not np.any(row):
            report.append(Issue(item_id, "zero-vector", None, "warning"))
    return report


def format_issue(issue: Issue) -> str:
    where = "" if issue.component is None else f" component {issue.component}"
    return f"{issue.severity}\t{issue.item_id}\t{issue.kind}{where}"
