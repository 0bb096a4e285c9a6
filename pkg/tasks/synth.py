"""
Seeded synthetic transduction tasks.

Classes are random directions on the unit sphere. A sample of class k is
normalize(class_sep * direction_k + N(0, I)); the text prototype of class k
is normalize(direction_k + prototype_noise * N(0, I)), so prototype_noise
sets how unreliable the text prior is.

Draw order is fixed (directions, prototype noise, query, support,
validation) so that changing one knob, e.g. prototype_noise, leaves every
other array of the task unchanged for the same seed.
"""
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fileio import write_config, write_embeddings, write_labels
from .types import EmbeddingMatrix, Hyperparams, SupportSet, TaskSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SyntheticTask:
    spec: TaskSpec
    truth: np.ndarray
    validation: EmbeddingMatrix
    validation_labels: np.ndarray

    def __iter__(self):
        # Unpacks as (spec, truth).
        return iter((self.spec, self.truth))


def _unit_rows(x):
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def _draw_samples(rng, directions, per_class, class_sep):
    n_classes, dim = directions.shape
    labels = np.repeat(np.arange(n_classes), per_class)
    noise = rng.standard_normal((labels.shape[0], dim))
    order = rng.permutation(labels.shape[0])
    labels = labels[order]
    return _unit_rows(class_sep * directions[labels] + noise[order]), labels


def generate_task(K, d, n_query_per_class, shots_per_class, class_sep, prototype_noise, tau, seed,
                  validation_per_class=4, hyper=None):
    """Generate one task; returns a SyntheticTask (unpackable as ``spec, truth``)."""
    if K < 1 or d < 2:
        raise ValueError(f"Need K >= 1 and d >= 2, got K={K}, d={d}.")
    if not class_sep > 0 or prototype_noise < 0:
        raise ValueError("class_sep must be positive and prototype_noise non-negative.")

    rng = np.random.default_rng(seed)
    directions = _unit_rows(rng.standard_normal((K, d)))
    prototype_noise_draw = rng.standard_normal((K, d))
    text = _unit_rows(directions + prototype_noise * prototype_noise_draw)

    query, truth = _draw_samples(rng, directions, n_query_per_class, class_sep)
    support = None
    if shots_per_class > 0:
        shots, shot_labels = _draw_samples(rng, directions, shots_per_class, class_sep)
        support = SupportSet(EmbeddingMatrix(shots), shot_labels)
    validation, validation_labels = _draw_samples(rng, directions, validation_per_class, class_sep)

    spec = TaskSpec(
        query=EmbeddingMatrix(query),
        text=EmbeddingMatrix(text),
        tau=float(tau),
        hyper=hyper or (Hyperparams.few_shot() if support is not None else Hyperparams.zero_shot()),
        support=support,
    )
    logger.debug("generated task K=%d d=%d |Q|=%d |S|=%d seed=%s", K, d, spec.n_query, spec.n_support, seed)
    return SyntheticTask(spec, truth, EmbeddingMatrix(validation), validation_labels)


def write_task(task, directory, seed=None):
    """
    Write a task directory: query.emb, text.emb, truth.labels, validation.emb,
    validation.labels, support.emb/support.labels when there are shots, and
    config.txt pointing at all of them.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    spec = task.spec

    write_embeddings(spec.query, directory / 'query.emb')
    write_embeddings(spec.text, directory / 'text.emb')
    write_labels(task.truth, directory / 'truth.labels')
    write_embeddings(task.validation, directory / 'validation.emb')
    write_labels(task.validation_labels, directory / 'validation.labels')

    config = {'query': 'query.emb', 'text': 'text.emb', 'truth': 'truth.labels', 'tau': repr(spec.tau)}
    if spec.is_few_shot:
        write_embeddings(spec.support.embeddings, directory / 'support.emb')
        write_labels(spec.support.labels, directory / 'support.labels')
        config.update({'support': 'support.emb', 'support-labels': 'support.labels'})
    config.update({'validation': 'validation.emb', 'validation-labels': 'validation.labels'})
    if seed is not None:
        config['seed'] = str(seed)
    write_config(config, directory / 'config.txt')
    return directory
