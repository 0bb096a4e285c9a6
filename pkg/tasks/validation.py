# tasks/validation.py
import logging

import numpy as np

from .exceptions import (
    DimensionMismatch, EmptyMatrix, LabelOutOfRange, NonFiniteValue, NormTooFarFromUnit,
)
from .types import EmbeddingMatrix, SupportSet, TaskSpec

logger = logging.getLogger(__name__)

NORM_TOLERANCE = 1e-2  # rows further than this from unit norm are corrupt
RENORM_EPSILON = 1e-12  # rows closer than this are left bit-for-bit alone


def renorm_epsilon(dtype):
    """Norm error a row of this dtype can carry from rounding a unit-norm row."""
    if np.issubdtype(dtype, np.floating):
        return max(RENORM_EPSILON, float(np.finfo(dtype).eps))
    return RENORM_EPSILON


def normalize_embeddings(data, name='embeddings'):
    """
    Check a raw matrix and return it as unit-norm EmbeddingMatrix.

    Rows are rescaled to unit norm when they are within NORM_TOLERANCE of it;
    anything further off is rejected rather than silently fixed.
    """
    source = np.asarray(data)
    epsilon = renorm_epsilon(source.dtype)
    data = source.astype(np.float64)
    if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
        raise EmptyMatrix(f"{name}: expected a non-empty N×d matrix, got shape {data.shape}.")
    if not np.all(np.isfinite(data)):
        bad_row = int(np.argwhere(~np.isfinite(data))[0][0])
        raise NonFiniteValue(f"{name}: row {bad_row} contains a NaN or infinite value.")

    norms = np.linalg.norm(data, axis=1)
    off = np.abs(norms - 1.0)
    if np.any(off > NORM_TOLERANCE):
        bad_row = int(np.argmax(off))
        raise NormTooFarFromUnit(
            f"{name}: row {bad_row} has L2 norm {norms[bad_row]:.6g}, "
            f"more than {NORM_TOLERANCE} away from 1."
        )

    fix = off > epsilon
    if np.any(fix):
        logger.debug("%s: renormalising %d of %d rows", name, int(fix.sum()), data.shape[0])
        data = data.copy()
        data[fix] /= norms[fix, None]
    return EmbeddingMatrix(data)


def _check_labels(labels, n_classes, name):
    labels = np.asarray(labels)
    if labels.ndim != 1 or not np.issubdtype(labels.dtype, np.integer):
        raise LabelOutOfRange(f"{name}: labels must be a vector of integer class indices.")
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        bad = int(labels[(labels < 0) | (labels >= n_classes)][0])
        raise LabelOutOfRange(f"{name}: label {bad} is outside [0, {n_classes}).")
    return labels


def validate_task(spec: TaskSpec) -> TaskSpec:
    """
    Check every invariant of a task and return the normalised task.

    The number of classes K is the number of text prototypes. Validating an
    already validated task returns an equal task.
    """
    query = normalize_embeddings(spec.query.data, 'query')
    text = normalize_embeddings(spec.text.data, 'text')
    if text.dim != query.dim:
        raise DimensionMismatch(
            f"text prototypes have dimension {text.dim}, query embeddings {query.dim}."
        )
    if not (np.isfinite(spec.tau) and spec.tau > 0):
        raise NonFiniteValue(f"temperature must be a positive finite number, got {spec.tau}.")

    support = None
    if spec.support is not None and len(spec.support):
        shots = normalize_embeddings(spec.support.embeddings.data, 'support')
        if shots.dim != query.dim:
            raise DimensionMismatch(
                f"support embeddings have dimension {shots.dim}, query embeddings {query.dim}."
            )
        labels = _check_labels(spec.support.labels, text.n_rows, 'support')
        if labels.shape[0] != shots.n_rows:
            raise DimensionMismatch(
                f"{labels.shape[0]} support labels for {shots.n_rows} support embeddings."
            )
        support = SupportSet(shots, labels)

    return TaskSpec(query=query, text=text, tau=float(spec.tau), hyper=spec.hyper, support=support)
