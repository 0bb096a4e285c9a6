"""
On-disk formats: EMB1 embedding files, CSV embeddings, label files,
predictions CSV, flat key=value run configs and the debug/diagnostic CSVs.

EMB1 layout (all little-endian):
    b"EMB1" | u32 n_rows | u32 dim | n_rows*dim float32, row-major
"""
import csv
import logging
import struct
from pathlib import Path

import numpy as np

from .exceptions import (
    BadMagic, IoFailure, NegativeLabel, NonFiniteValue, OversizedFile, ParseError,
    RaggedCsv, TrailingData, TruncatedFile,
)
from .types import EmbeddingMatrix
from .validation import normalize_embeddings

logger = logging.getLogger(__name__)

EMB_MAGIC = b'EMB1'
EMB_HEADER = struct.Struct('<II')
EMB_DTYPE = np.dtype('<f4')
MAX_PAYLOAD_BYTES = 1 << 30  # sanity cap against corrupt headers
CSV_SUFFIXES = ('.csv', '.txt')


def read_embeddings(path):
    """Read an EMB1 or CSV embedding file into a unit-norm EmbeddingMatrix."""
    path = Path(path)
    try:
        with path.open('rb') as handle:
            magic = handle.read(len(EMB_MAGIC))
            if magic == EMB_MAGIC:
                data = _read_emb1_payload(handle, path)
            elif path.suffix.lower() in CSV_SUFFIXES:
                data = None
            else:
                raise BadMagic(f"{path}: not an EMB1 file (magic {magic!r}) and not a .csv file.")
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc

    if data is None:
        data = _read_csv_matrix(path)
    return normalize_embeddings(data, name=str(path))


def _read_emb1_payload(handle, path):
    header = handle.read(EMB_HEADER.size)
    if len(header) < EMB_HEADER.size:
        raise TruncatedFile(f"{path}: header ends after {len(header)} of {EMB_HEADER.size} bytes.")
    n_rows, dim = EMB_HEADER.unpack(header)
    expected = n_rows * dim * EMB_DTYPE.itemsize
    if expected > MAX_PAYLOAD_BYTES:
        raise OversizedFile(
            f"{path}: header declares {n_rows}x{dim} floats ({expected} bytes), above the 1 GiB cap."
        )
    # One extra byte tells a longer-than-declared payload apart.
    payload = handle.read(expected + 1)
    if len(payload) < expected:
        raise TruncatedFile(f"{path}: payload has {len(payload)} bytes, header declares {expected}.")
    if len(payload) > expected:
        raise TrailingData(f"{path}: payload is longer than the declared {expected} bytes.")
    data = np.frombuffer(payload, dtype=EMB_DTYPE).reshape(n_rows, dim)
    if not np.all(np.isfinite(data)):
        raise NonFiniteValue(f"{path}: payload contains NaN or infinite values.")
    return data


def _read_csv_matrix(path):
    rows = []
    try:
        with path.open(newline='') as handle:
            for line_no, row in enumerate(csv.reader(handle), start=1):
                if rows and len(row) != len(rows[0]):
                    raise RaggedCsv(
                        f"{path}: line {line_no} has {len(row)} columns, line 1 has {len(rows[0])}."
                    )
                try:
                    rows.append([float(cell) for cell in row])
                except ValueError as exc:
                    raise ParseError(f"{path}: line {line_no}: {exc}") from exc
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc
    data = np.array(rows, dtype=np.float64)
    if data.size and not np.all(np.isfinite(data)):
        raise NonFiniteValue(f"{path}: contains NaN or infinite values.")
    return data


def write_embeddings(matrix, path):
    """Write an EmbeddingMatrix (or raw N×d array) as EMB1 float32."""
    data = matrix.data if isinstance(matrix, EmbeddingMatrix) else np.asarray(matrix)
    data = np.ascontiguousarray(data, dtype=EMB_DTYPE)
    n_rows, dim = data.shape
    try:
        with Path(path).open('wb') as handle:
            handle.write(EMB_MAGIC)
            handle.write(EMB_HEADER.pack(n_rows, dim))
            handle.write(data.tobytes(order='C'))
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc


def read_labels(path):
    """Newline-separated non-negative integers; a trailing newline is optional."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc
    if text.endswith('\n'):
        text = text[:-1]
    if not text:
        return np.zeros(0, dtype=np.int64)

    labels = []
    for line_no, line in enumerate(text.split('\n'), start=1):
        token = line.strip()
        if not token:
            raise ParseError(f"{path}: line {line_no} is blank.")
        try:
            value = int(token)
        except ValueError as exc:
            raise ParseError(f"{path}: line {line_no}: {token!r} is not an integer.") from exc
        if value < 0:
            raise NegativeLabel(f"{path}: line {line_no}: negative label {value}.")
        labels.append(value)
    return np.array(labels, dtype=np.int64)


def write_labels(labels, path):
    try:
        Path(path).write_text(''.join(f"{int(label)}\n" for label in labels))
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc


def _fmt(value):
    return f"{value:.9g}"


def write_predictions(assignments, path):
    """CSV ``index,pred,conf,p_0..p_{K-1}`` for every row of the assignments."""
    z = assignments.z
    preds = np.argmax(z, axis=1)  # first maximum, i.e. lowest class index on ties
    header = ['index', 'pred', 'conf'] + [f"p_{k}" for k in range(z.shape[1])]
    try:
        with Path(path).open('w', newline='') as handle:
            writer = csv.writer(handle, lineterminator='\n')
            writer.writerow(header)
            for i, row in enumerate(z):
                writer.writerow([i, int(preds[i]), _fmt(row[preds[i]])] + [_fmt(p) for p in row])
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc


def read_predictions(path):
    """The ``pred`` column of a predictions CSV, in row order."""
    try:
        with Path(path).open(newline='') as handle:
            reader = csv.DictReader(handle)
            if reader.fieldnames is None or 'pred' not in reader.fieldnames:
                raise ParseError(f"{path}: missing 'pred' column.")
            try:
                return np.array([int(row['pred']) for row in reader], dtype=np.int64)
            except (TypeError, ValueError) as exc:
                raise ParseError(f"{path}: {exc}") from exc
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc


def read_config(path):
    """
    Flat ``key=value`` run config. Keys are long flag names without dashes;
    ``#`` starts a comment line. Relative paths are left as written, callers
    resolve them against ``Path(path).parent``.
    """
    values = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc
    for line_no, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith('#'):
            continue
        key, sep, value = line.partition('=')
        if not sep or not key.strip():
            raise ParseError(f"{path}: line {line_no} is not key=value.")
        values[key.strip()] = value.strip()
    return values


def write_config(values, path):
    try:
        Path(path).write_text(''.join(f"{key}={value}\n" for key, value in values.items()))
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc


def write_graph(graph, path):
    """Debug dump of an AffinityGraph, one ``i j w`` line per edge."""
    try:
        with Path(path).open('w') as handle:
            for i, j, w in graph.edges():
                handle.write(f"{i} {j} {_fmt(w)}\n")
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc


def write_csv(path, header, rows):
    """Small helper for the objective trace, score table and ablation CSVs."""
    try:
        with Path(path).open('w', newline='') as handle:
            writer = csv.writer(handle, lineterminator='\n')
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) if isinstance(v, float) else v for v in row])
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc
